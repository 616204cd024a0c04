use serde::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub location: f64,
    pub multiplicity: u64,
}

/// Finite point measure as a sorted list of distinct atoms.
///
/// Lattice positions are merged in exact grid units before conversion, so two
/// particles share an atom exactly when they sit on the same lattice site.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PointMeasure {
    atoms: Vec<Atom>,
}

impl PointMeasure {
    pub fn empty() -> PointMeasure {
        PointMeasure::default()
    }

    pub fn dirac(x: f64) -> PointMeasure {
        PointMeasure { atoms: vec![Atom { location: x, multiplicity: 1 }] }
    }

    /// One unit mass per point. Points are merged by exact equality.
    pub fn from_points(xs: impl IntoIterator<Item = f64>) -> PointMeasure {
        PointMeasure::from_atoms(xs.into_iter().map(|x| (x, 1)))
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, u64)>) -> PointMeasure {
        let mut raw: Vec<(f64, u64)> = atoms.into_iter().filter(|(_, m)| *m > 0).collect();
        assert!(raw.iter().all(|(x, _)| !x.is_nan()), "NaN atom location");
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<Atom> = Vec::with_capacity(raw.len());
        for (x, m) in raw {
            match out.last_mut() {
                // -0.0 and 0.0 are the same site
                Some(last) if last.location == x => last.multiplicity += m,
                _ => out.push(Atom { location: if x == 0.0 { 0.0 } else { x }, multiplicity: m }),
            }
        }
        PointMeasure { atoms: out }
    }

    /// Builds a measure from positions in grid units, converting with `scale`
    /// units per unit length.
    pub fn from_units(units: impl IntoIterator<Item = f64>, scale: f64) -> PointMeasure {
        let mut m = PointMeasure::from_points(units);
        if scale != 1.0 {
            for a in &mut m.atoms {
                a.location /= scale;
            }
        }
        m
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> u64 {
        self.atoms.iter().map(|a| a.multiplicity).sum()
    }

    pub fn max_location(&self) -> Option<f64> {
        self.atoms.last().map(|a| a.location)
    }

    pub fn shifted(&self, d: f64) -> PointMeasure {
        PointMeasure::from_atoms(self.atoms.iter().map(|a| (a.location + d, a.multiplicity)))
    }

    pub fn mass_at(&self, x: f64) -> u64 {
        match self.atoms.binary_search_by(|a| a.location.total_cmp(&x)) {
            Ok(i) => self.atoms[i].multiplicity,
            Err(_) => {
                if x == 0.0 {
                    // total_cmp separates the two zeros; locations are normalised to +0
                    self.atoms.iter().filter(|a| a.location == 0.0).map(|a| a.multiplicity).sum()
                } else {
                    0
                }
            }
        }
    }

    /// Mass of `(x, inf)`.
    pub fn mass_above(&self, x: f64) -> u64 {
        self.atoms.iter().rev().take_while(|a| a.location > x).map(|a| a.multiplicity).sum()
    }

    /// Restriction to `[lo, inf)`.
    pub fn restricted_above(&self, lo: f64) -> PointMeasure {
        PointMeasure { atoms: self.atoms.iter().copied().filter(|a| a.location >= lo).collect() }
    }

    /// `<mu, f> = sum of multiplicity * f(location)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.multiplicity as f64 * f(a.location)).sum()
    }

    /// Whether every atom of `self` appears in `other` with at least the
    /// same multiplicity.
    pub fn is_contained_in(&self, other: &PointMeasure) -> bool {
        self.atoms.iter().all(|a| other.mass_at(a.location) >= a.multiplicity)
    }
}

/// Maximal displacement, with extinction as a distinguished value rather than
/// a floating-point infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxDisplacement {
    NegInf,
    At(f64),
}

impl MaxDisplacement {
    pub fn value(self) -> Option<f64> {
        match self {
            MaxDisplacement::At(x) => Some(x),
            MaxDisplacement::NegInf => None,
        }
    }

    pub fn is_at_least(self, a: f64) -> bool {
        matches!(self, MaxDisplacement::At(x) if x >= a)
    }
}

impl Serialize for MaxDisplacement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaxDisplacement::At(x) => s.serialize_f64(*x),
            MaxDisplacement::NegInf => s.serialize_str("-inf"),
        }
    }
}
