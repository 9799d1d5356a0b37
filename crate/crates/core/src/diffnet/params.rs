use crate::error::{Error, Result};

/// One named trainable array stored row-major, with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Named collection of trainable arrays plus the count of optimizer steps
/// applied to it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<Param>,
    step_count: u64,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an array and returns its index.
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], value: Vec<f64>) -> Result<usize> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != value.len() {
            return Err(Error::contract(format!(
                "parameter `{name}` has {} values for shape {shape:?}",
                value.len()
            )));
        }
        if self.entries.iter().any(|p| p.name == name) {
            return Err(Error::contract(format!("duplicate parameter `{name}`")));
        }
        self.entries.push(Param {
            name,
            shape: shape.to_vec(),
            grad: vec![0.0; value.len()],
            value,
        });
        Ok(self.entries.len() - 1)
    }

    pub fn entries(&self) -> &[Param] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Param] {
        &mut self.entries
    }

    pub fn get(&self, index: usize) -> &Param {
        &self.entries[index]
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Param {
        &mut self.entries[index]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.entries.iter().find(|p| p.name == name)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub(crate) fn bump_step(&mut self) {
        self.step_count += 1;
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(Param::len).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.entries {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales gradients so their global norm is at most `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: f64) {
        let norm = self.grad_norm();
        if norm.is_finite() && norm > max_norm {
            let scale = max_norm / norm;
            for p in &mut self.entries {
                p.grad.iter_mut().for_each(|g| *g *= scale);
            }
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.entries {
            p.grad.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn first_non_finite_grad(&self) -> Option<&str> {
        self.entries
            .iter()
            .find(|p| p.grad.iter().any(|g| !g.is_finite()))
            .map(|p| p.name.as_str())
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    /// Mutable access to the `k`-th scalar in flat (entry-major) order.
    pub fn scalar_mut(&mut self, mut k: usize) -> &mut f64 {
        for p in &mut self.entries {
            if k < p.value.len() {
                return &mut p.value[k];
            }
            k -= p.value.len();
        }
        panic!("scalar index out of range");
    }

    /// True when both sets hold bit-identical values.
    pub fn same_values(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.name == b.name
                    && a.value.len() == b.value.len()
                    && a.value.iter().zip(&b.value).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}
