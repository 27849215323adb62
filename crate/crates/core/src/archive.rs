//! Elite archive: one best individual per niche.

use rand::Rng;

use crate::cvt::CentroidSet;
use crate::error::{Error, Result};

/// An evaluated genotype.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    /// Search vector in the unit box.
    pub genotype: Vec<f64>,
    /// Performance to maximize.
    pub fitness: f64,
    pub descriptor: Vec<f64>,
    /// Self-adapted mutation strength, only carried by IsoSA runs.
    pub sigma: Option<f64>,
}

impl Individual {
    pub fn new(genotype: Vec<f64>, fitness: f64, descriptor: Vec<f64>) -> Self {
        Individual {
            genotype,
            fitness,
            descriptor,
            sigma: None,
        }
    }

    pub fn with_sigma(mut self, sigma: Option<f64>) -> Self {
        self.sigma = sigma;
        self
    }

    fn check(&self) -> Result<()> {
        if let Some(i) = self
            .genotype
            .iter()
            .position(|g| !(0.0..=1.0).contains(g))
        {
            return Err(Error::Contract(format!(
                "genotype coordinate {i} = {} is outside [0, 1]",
                self.genotype[i]
            )));
        }
        if self.fitness.is_nan() {
            return Err(Error::Contract("fitness is NaN".into()));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::Contract(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// What happened to a candidate offered to the archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    /// The niche was empty.
    Filled { niche: usize },
    /// The candidate beat the incumbent.
    Replaced { niche: usize },
    /// The incumbent was at least as fit.
    Rejected { niche: usize },
}

impl Insertion {
    pub fn niche(self) -> usize {
        match self {
            Insertion::Filled { niche }
            | Insertion::Replaced { niche }
            | Insertion::Rejected { niche } => niche,
        }
    }

    pub fn accepted(self) -> bool {
        !matches!(self, Insertion::Rejected { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Archive {
    slots: Vec<Option<Individual>>,
    /// Occupied niches in the order they were first filled.
    occupied: Vec<usize>,
}

/// Archives are equal when every slot holds the same individual; the
/// order in which niches were first filled is not compared.
impl PartialEq for Archive {
    fn eq(&self, other: &Self) -> bool {
        self.slots == other.slots
    }
}

impl Archive {
    pub fn new(capacity: usize) -> Self {
        Archive {
            slots: vec![None; capacity],
            occupied: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn filled_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn get(&self, niche: usize) -> Option<&Individual> {
        self.slots.get(niche).and_then(Option::as_ref)
    }

    /// Offers `ind` to the niche of its closest centroid. Equal fitness keeps
    /// the incumbent.
    pub fn try_insert(&mut self, ind: Individual, centroids: &CentroidSet) -> Result<Insertion> {
        if centroids.len() != self.capacity() {
            return Err(Error::Contract(format!(
                "archive capacity {} does not match {} centroids",
                self.capacity(),
                centroids.len()
            )));
        }
        ind.check()?;
        let niche = centroids.nearest(&ind.descriptor)?;
        Ok(self.offer(niche, ind))
    }

    fn offer(&mut self, niche: usize, ind: Individual) -> Insertion {
        match &mut self.slots[niche] {
            slot @ None => {
                *slot = Some(ind);
                self.occupied.push(niche);
                Insertion::Filled { niche }
            }
            Some(incumbent) if incumbent.fitness < ind.fitness => {
                *incumbent = ind;
                Insertion::Replaced { niche }
            }
            Some(_) => Insertion::Rejected { niche },
        }
    }

    /// Places `ind` directly into `niche`, bypassing the centroid lookup.
    /// Used when restoring an archive from disk.
    pub fn restore(&mut self, niche: usize, ind: Individual) -> Result<()> {
        if niche >= self.capacity() {
            return Err(Error::Contract(format!(
                "niche {niche} out of range for capacity {}",
                self.capacity()
            )));
        }
        if self.slots[niche].is_some() {
            return Err(Error::Contract(format!("niche {niche} already occupied")));
        }
        ind.check()?;
        self.offer(niche, ind);
        Ok(())
    }

    /// Uniformly random occupied niche.
    pub fn select_niche<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.occupied.is_empty() {
            return Err(Error::EmptyArchive);
        }
        Ok(self.occupied[rng.random_range(0..self.occupied.len())])
    }

    /// Copy of a uniformly random elite.
    pub fn select_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Individual> {
        let niche = self.select_niche(rng)?;
        Ok(self.slots[niche].clone().expect("occupied niche"))
    }

    /// Occupied slots in ascending niche order.
    pub fn elites(&self) -> Vec<(usize, &Individual)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|ind| (i, ind)))
            .collect()
    }

    pub fn genotypes(&self) -> Vec<&[f64]> {
        self.slots
            .iter()
            .flatten()
            .map(|ind| ind.genotype.as_slice())
            .collect()
    }
}
