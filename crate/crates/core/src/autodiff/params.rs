use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use super::GraphError;
use crate::tensor::Tensor;

/// Half-width of the uniform weight initializer.
pub const INIT_SCALE: f64 = 0.05;

/// Parameter group used by the block-coordinate update schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    /// Context-sensitive embedding values (`w′`).
    Embed,
    /// Parameters of a χ-function.
    Chi,
    /// Everything else; updated on every step.
    Other,
}

impl Group {
    fn bit(self) -> u8 {
        match self {
            Group::Embed => 1,
            Group::Chi => 2,
            Group::Other => 4,
        }
    }
}

/// A set of [`Group`]s.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GroupSet(u8);

impl GroupSet {
    pub const ALL: GroupSet = GroupSet(7);

    pub fn of(groups: &[Group]) -> Self {
        GroupSet(groups.iter().fold(0, |acc, g| acc | g.bit()))
    }

    pub fn contains(self, g: Group) -> bool {
        self.0 & g.bit() != 0
    }
}

impl fmt::Debug for GroupSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = [Group::Embed, Group::Chi, Group::Other]
            .into_iter()
            .filter(|g| self.contains(*g))
            .collect();
        write!(f, "{names:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub group: Group,
}

/// Named trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor, group: Group) -> Result<ParamId, GraphError> {
        if self.by_name.contains_key(name) {
            return Err(GraphError::DuplicateParam(name.to_string()));
        }
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            value,
            group,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Registers a weight drawn from `uniform(−0.05, 0.05)`.
    pub fn add_weight<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        shape: &[usize],
        group: Group,
        rng: &mut R,
    ) -> Result<ParamId, GraphError> {
        self.add(name, Tensor::uniform(shape, -INIT_SCALE, INIT_SCALE, rng), group)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize], group: Group) -> Result<ParamId, GraphError> {
        self.add(name, Tensor::zeros(shape), group)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}
