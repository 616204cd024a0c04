use statrs::function::erf::erfc;

use crate::error::Result;
use crate::reproduction::{ratio_f64, GaussianLaw, ReproductionLaw};

/// Per-depth pruning radii for subtree simulation.
///
/// A particle with `j` generations still to run and sitting a distance `D`
/// below the window edge has some expected number `h_j(D)` of descendants
/// reaching the window. The particle is dropped once `h_j(D) < delta`, i.e.
/// once `D > radius[j]`, and `h_j(D)` is charged to the realization's bias
/// bound.
///
/// Gaussian families have `h_j(D) = m^j P(N(j mean, j sd^2) >= D)` exactly.
/// Tabulated laws use the Chernoff bound `exp(-j psi*(D/j))`, optimised over
/// the tilt, and are charged `delta` per dropped particle.
///
/// For laws with bounded displacements, particles that cannot reach the
/// window even by always taking the largest step are dropped free of charge.
#[derive(Debug, Clone)]
pub struct PruneTable {
    delta: f64,
    /// Indexed by remaining generations, in grid units; `+inf` disables.
    radius: Vec<f64>,
    /// Largest single displacement in grid units, if bounded.
    reach: Option<f64>,
    gaussian: Option<GaussianTail>,
}

/// `h_j(D)` for Gaussian displacements.
#[derive(Debug, Clone, Copy)]
struct GaussianTail {
    log_m: f64,
    mean: f64,
    sd: f64,
}

impl GaussianTail {
    fn from_law(law: &ReproductionLaw) -> Option<GaussianTail> {
        match law {
            ReproductionLaw::Gaussian(_, GaussianLaw { offspring, mean, sd }) => {
                Some(GaussianTail { log_m: offspring.mean().ln(), mean: *mean, sd: *sd })
            }
            ReproductionLaw::Tabulated(_) => None,
        }
    }

    fn log_hits(&self, distance: f64, j: usize) -> f64 {
        let jf = j as f64;
        jf * self.log_m + log_normal_tail((distance - jf * self.mean) / (self.sd * jf.sqrt()))
    }

    /// Distance at which `log_hits` equals `log_delta`.
    fn radius(&self, log_delta: f64, j: usize) -> f64 {
        let jf = j as f64;
        let target = log_delta - jf * self.log_m;
        if target >= 0.0 {
            return f64::NEG_INFINITY;
        }
        // log_normal_tail is decreasing; bracket then bisect
        let (mut lo, mut hi) = (-40.0, 1.0);
        while log_normal_tail(hi) > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if log_normal_tail(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        jf * self.mean + self.sd * jf.sqrt() * hi
    }
}

/// `ln P(N(0,1) >= z)`.
pub(crate) fn log_normal_tail(z: f64) -> f64 {
    if z < 30.0 {
        (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln()
    } else {
        let z2 = z * z;
        -0.5 * z2 - z.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

const BISECTION_STEPS: usize = 60;

impl PruneTable {
    /// Radii for `0..=max_depth` remaining generations.
    pub fn new(law: &ReproductionLaw, max_depth: usize, delta: f64) -> Result<PruneTable> {
        let reach = law.max_displacement().map(|d| ratio_f64(&d) * law.grid());
        let gaussian = GaussianTail::from_law(law);
        let mut radius = vec![f64::INFINITY; max_depth + 1];
        if delta > 0.0 && delta < 1.0 {
            let target = -delta.ln();
            for (j, r) in radius.iter_mut().enumerate().skip(1) {
                *r = match &gaussian {
                    Some(g) => g.radius(-target, j),
                    None => law.to_units(j as f64 * threshold(law, target / j as f64)?),
                };
            }
        }
        Ok(PruneTable { delta, radius, reach, gaussian })
    }

    pub fn disabled(law: &ReproductionLaw) -> PruneTable {
        PruneTable {
            delta: 0.0,
            radius: Vec::new(),
            reach: law.max_displacement().map(|d| ratio_f64(&d) * law.grid()),
            gaussian: None,
        }
    }

    /// Bias charged for dropping a particle `distance` units below the window
    /// with `remaining` generations to go.
    #[inline]
    pub fn charge(&self, distance: f64, remaining: usize) -> f64 {
        match &self.gaussian {
            Some(g) => g.log_hits(distance, remaining).exp().min(self.delta),
            None => self.delta,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Radius at `remaining` generations, in grid units.
    #[inline]
    pub fn radius(&self, remaining: usize) -> f64 {
        self.radius.get(remaining).copied().unwrap_or(f64::INFINITY)
    }

    /// Whether a particle `distance` units below the window with `remaining`
    /// generations to go can still reach it.
    #[inline]
    pub fn unreachable(&self, distance: f64, remaining: usize) -> bool {
        match self.reach {
            Some(r) => distance > remaining as f64 * r,
            None => false,
        }
    }
}

/// Smallest `x` with `psi*(x) >= level`, or `-inf` when `psi*` is above the
/// level everywhere.
fn threshold(law: &ReproductionLaw, level: f64) -> Result<f64> {
    let floor = law.psi_prime_at_zero()?;
    if law.legendre(floor)?.value >= level {
        return Ok(f64::NEG_INFINITY);
    }
    let cap = law.max_displacement().map(|d| ratio_f64(&d));
    let mut lo = floor;
    let mut hi = floor + 1.0;
    loop {
        if let Some(c) = cap {
            if hi >= c {
                if law.legendre(c)?.value < level {
                    // only the support edge is out of reach; beyond it psi* is infinite
                    return Ok(c);
                }
                hi = c;
                break;
            }
        }
        if law.legendre(hi)?.value >= level {
            break;
        }
        lo = hi;
        hi = floor + 2.0 * (hi - floor);
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if law.legendre(mid)?.value >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
