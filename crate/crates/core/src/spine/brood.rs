use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::reproduction::{log_sum_exp, ratio_f64, Offspring, ReproductionLaw};

/// One brood of the spine particle: ranked displacements (grid units,
/// non-increasing) and the position of the spine child among them.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeBiasedBrood {
    pub displacements: Vec<f64>,
    /// Zero-based index into `displacements`.
    pub spine_index: usize,
}

impl SizeBiasedBrood {
    pub fn spine_displacement(&self) -> f64 {
        self.displacements[self.spine_index]
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Tabulated {
        rows: WeightedIndex<f64>,
        /// Per-row choice of the spine child, `None` for childless rows
        /// (which carry zero weight).
        within: Vec<Option<WeightedIndex<f64>>>,
    },
    Gaussian {
        mean: f64,
        sd: f64,
        tilted_mean: f64,
        others: OtherCount,
    },
}

#[derive(Debug, Clone)]
enum OtherCount {
    Poisson(Poisson<f64>),
    Fixed(usize),
    /// Size-biased total count; the spine is one of them.
    SizeBiased { counts: Vec<usize>, index: WeightedIndex<f64> },
}

/// Sampler for the size-biased brood `(L^, xi)` at tilt `theta`:
/// `E f(L^, xi) = E sum_k exp(theta V(k) - psi(theta)) f(Z_1, k)`.
#[derive(Debug, Clone)]
pub struct SpineSampler {
    theta: f64,
    psi: f64,
    kind: Kind,
}

impl SpineSampler {
    pub fn new(law: &ReproductionLaw, theta: f64) -> Result<SpineSampler> {
        if !(theta > 0.0) {
            return Err(Error::NonPositiveTheta(theta));
        }
        let psi = law.log_laplace(theta)?;
        let kind = match law {
            ReproductionLaw::Tabulated(t) => {
                let grid = t.grid() as f64;
                let mut weights = Vec::with_capacity(t.rows().len());
                let mut within = Vec::with_capacity(t.rows().len());
                for (j, row) in t.rows().iter().enumerate() {
                    let units = t.row_units(j);
                    let p = ratio_f64(&row.prob);
                    if units.is_empty() || p == 0.0 {
                        weights.push(0.0);
                        within.push(None);
                        continue;
                    }
                    let lse = log_sum_exp(units.iter().map(|u| theta * u / grid));
                    weights.push((p.ln() + lse - psi).exp());
                    let top = units[0];
                    let w: Vec<f64> = units.iter().map(|u| (theta * (u - top) / grid).exp()).collect();
                    within.push(Some(WeightedIndex::new(&w).map_err(|e| Error::InvalidArgument(e.to_string()))?));
                }
                let rows = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Kind::Tabulated { rows, within }
            }
            ReproductionLaw::Gaussian(_, g) => {
                let others = match &g.offspring {
                    Offspring::Poisson { dist, .. } => OtherCount::Poisson(*dist),
                    Offspring::Fixed(b) => OtherCount::Fixed(*b as usize - 1),
                    Offspring::Finite { probs, .. } => {
                        let counts: Vec<usize> = probs.iter().map(|(k, _)| *k as usize).collect();
                        let w: Vec<f64> = probs.iter().map(|(k, p)| f64::from(*k) * ratio_f64(p)).collect();
                        let index = WeightedIndex::new(&w).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                        OtherCount::SizeBiased { counts, index }
                    }
                };
                Kind::Gaussian { mean: g.mean, sd: g.sd, tilted_mean: g.mean + theta * g.sd * g.sd, others }
            }
        };
        Ok(SpineSampler { theta, psi, kind })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// Fills `out` with the ranked brood and returns the spine index.
    pub fn sample_into<R: Rng + ?Sized>(&self, law: &ReproductionLaw, rng: &mut R, out: &mut Vec<f64>) -> usize {
        out.clear();
        match &self.kind {
            Kind::Tabulated { rows, within } => {
                let t = law.as_tabulated().expect("sampler built for a tabulated law");
                let j = rows.sample(rng);
                out.extend_from_slice(t.row_units(j));
                within[j].as_ref().expect("positive-weight row has children").sample(rng)
            }
            Kind::Gaussian { mean, sd, tilted_mean, others } => {
                let k = match others {
                    OtherCount::Poisson(d) => d.sample(rng) as usize,
                    OtherCount::Fixed(k) => *k,
                    OtherCount::SizeBiased { counts, index } => counts[index.sample(rng)] - 1,
                };
                for _ in 0..k {
                    let z: f64 = StandardNormal.sample(rng);
                    out.push(mean + sd * z);
                }
                let z: f64 = StandardNormal.sample(rng);
                let spine = tilted_mean + sd * z;
                out.push(spine);
                out.sort_by(|a, b| b.total_cmp(a));
                out.iter().position(|x| *x == spine).expect("spine child present")
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, law: &ReproductionLaw, rng: &mut R) -> SizeBiasedBrood {
        let mut displacements = Vec::new();
        let spine_index = self.sample_into(law, rng, &mut displacements);
        SizeBiasedBrood { displacements, spine_index }
    }

    /// One step of the tilted walk, in grid units, without the siblings.
    pub fn sample_step<R: Rng + ?Sized>(&self, law: &ReproductionLaw, rng: &mut R) -> f64 {
        match &self.kind {
            Kind::Tabulated { rows, within } => {
                let t = law.as_tabulated().expect("sampler built for a tabulated law");
                let j = rows.sample(rng);
                let i = within[j].as_ref().expect("positive-weight row has children").sample(rng);
                t.row_units(j)[i]
            }
            Kind::Gaussian { sd, tilted_mean, .. } => {
                let z: f64 = StandardNormal.sample(rng);
                tilted_mean + sd * z
            }
        }
    }

    /// Sum of `n` tilted steps. Gaussian families draw the sum directly, since
    /// the tilted step is exactly normal.
    pub fn sample_walk_end<R: Rng + ?Sized>(&self, law: &ReproductionLaw, n: usize, rng: &mut R) -> f64 {
        match &self.kind {
            Kind::Gaussian { sd, tilted_mean, .. } => {
                let z: f64 = StandardNormal.sample(rng);
                n as f64 * tilted_mean + sd * (n as f64).sqrt() * z
            }
            Kind::Tabulated { .. } => (0..n).map(|_| self.sample_step(law, rng)).sum(),
        }
    }
}

/// Draws one size-biased brood.
pub fn sample_size_biased<R: Rng + ?Sized>(law: &ReproductionLaw, theta: f64, rng: &mut R) -> Result<SizeBiasedBrood> {
    Ok(SpineSampler::new(law, theta)?.sample(law, rng))
}
