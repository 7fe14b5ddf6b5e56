use alloc::vec::Vec;

use crate::svm::kernel::rbf_unchecked;
use crate::svm::FeatureMatrix;

/// When the full Gram matrix is materialized and how many rows the
/// on-demand cache keeps otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelCachePolicy {
    pub full_limit: usize,
    pub lru_rows: usize,
}

impl Default for KernelCachePolicy {
    fn default() -> Self {
        Self { full_limit: 8192, lru_rows: 1024 }
    }
}

struct Slot {
    row: usize,
    stamp: u64,
    values: Vec<f64>,
}

struct Lru {
    capacity: usize,
    slot_of: Vec<Option<usize>>,
    slots: Vec<Slot>,
    clock: u64,
}

enum Storage {
    Full(Vec<f64>),
    Lru(Lru),
}

/// RBF Gram matrix over the rows of `x`, either precomputed or row-cached.
pub struct KernelCache<'a> {
    x: &'a FeatureMatrix,
    gamma: f64,
    storage: Storage,
    computed_rows: usize,
}

impl<'a> KernelCache<'a> {
    pub fn new(x: &'a FeatureMatrix, gamma: f64, policy: KernelCachePolicy) -> Self {
        let n = x.rows();
        let storage = if n <= policy.full_limit {
            let mut k = alloc::vec![0.0; n * n];
            for i in 0..n {
                k[i * n + i] = 1.0;
                for j in 0..i {
                    let v = rbf_unchecked(x.row(i), x.row(j), gamma);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            Storage::Full(k)
        } else {
            Storage::Lru(Lru {
                capacity: policy.lru_rows.max(2),
                slot_of: alloc::vec![None; n],
                slots: Vec::new(),
                clock: 0,
            })
        };
        Self { x, gamma, storage, computed_rows: 0 }
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn is_full(&self) -> bool {
        matches!(self.storage, Storage::Full(_))
    }

    /// Rows computed on demand so far (always 0 for the full matrix).
    pub fn computed_rows(&self) -> usize {
        self.computed_rows
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Full(k) => k[i * self.x.rows() + j],
            Storage::Lru(lru) => match (lru.slot_of[i], lru.slot_of[j]) {
                (Some(s), _) => lru.slots[s].values[j],
                (_, Some(s)) => lru.slots[s].values[i],
                _ if i == j => 1.0,
                _ => rbf_unchecked(self.x.row(i), self.x.row(j), self.gamma),
            },
        }
    }

    pub fn row(&mut self, i: usize) -> &[f64] {
        let n = self.x.rows();
        match self.storage {
            Storage::Full(ref k) => &k[i * n..(i + 1) * n],
            Storage::Lru(_) => {
                let s = self.ensure(i, None);
                match &self.storage {
                    Storage::Lru(lru) => &lru.slots[s].values,
                    Storage::Full(_) => unreachable!(),
                }
            }
        }
    }

    /// Two rows at once; both stay resident for the duration of the borrow.
    pub fn rows(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        let n = self.x.rows();
        match self.storage {
            Storage::Full(ref k) => (&k[i * n..(i + 1) * n], &k[j * n..(j + 1) * n]),
            Storage::Lru(_) => {
                let si = self.ensure(i, None);
                let sj = self.ensure(j, Some(si));
                match &self.storage {
                    Storage::Lru(lru) => (&lru.slots[si].values, &lru.slots[sj].values),
                    Storage::Full(_) => unreachable!(),
                }
            }
        }
    }

    fn ensure(&mut self, i: usize, protect: Option<usize>) -> usize {
        let Storage::Lru(lru) = &mut self.storage else { unreachable!() };
        lru.clock += 1;
        if let Some(s) = lru.slot_of[i] {
            lru.slots[s].stamp = lru.clock;
            return s;
        }
        let x = self.x;
        let gamma = self.gamma;
        let fill = |values: &mut Vec<f64>| {
            values.clear();
            values.extend((0..x.rows()).map(|j| if j == i { 1.0 } else { rbf_unchecked(x.row(i), x.row(j), gamma) }));
        };
        self.computed_rows += 1;
        if lru.slots.len() < lru.capacity {
            let mut values = Vec::with_capacity(x.rows());
            fill(&mut values);
            lru.slots.push(Slot { row: i, stamp: lru.clock, values });
            lru.slot_of[i] = Some(lru.slots.len() - 1);
            return lru.slots.len() - 1;
        }
        let victim = lru
            .slots
            .iter()
            .enumerate()
            .filter(|(s, _)| Some(*s) != protect)
            .min_by_key(|(_, slot)| slot.stamp)
            .map(|(s, _)| s)
            .expect("capacity is at least two");
        let old = lru.slots[victim].row;
        lru.slot_of[old] = None;
        let slot = &mut lru.slots[victim];
        fill(&mut slot.values);
        slot.row = i;
        slot.stamp = lru.clock;
        lru.slot_of[i] = Some(victim);
        victim
    }
}
