use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::OperatorTuple;
use crate::error::OtkError;
use crate::linalg::ComplexMatrix;

/// Named small instances with known distance and variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GalleryName {
    /// Pauli spin matrices `(σ1, σ2, σ3)`.
    Pauli,
    /// `(½(σ1 + iσ2), σ3)`: nilpotent Jordan block and `diag(1, -1)`.
    D2,
    /// `(e1 e1^*, e2 e1^*)`.
    Ex2,
}

impl GalleryName {
    pub const ALL: [GalleryName; 3] = [GalleryName::Pauli, GalleryName::D2, GalleryName::Ex2];

    pub fn as_str(self) -> &'static str {
        match self {
            GalleryName::Pauli => "pauli",
            GalleryName::D2 => "d2",
            GalleryName::Ex2 => "ex2",
        }
    }
}

impl fmt::Display for GalleryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GalleryName {
    type Err = OtkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pauli" => Ok(GalleryName::Pauli),
            "d2" => Ok(GalleryName::D2),
            "ex2" => Ok(GalleryName::Ex2),
            _ => Err(OtkError::UnknownName(s.to_string())),
        }
    }
}

fn m2(entries: [[Complex64; 2]; 2]) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[entries[0].to_vec(), entries[1].to_vec()]).expect("2x2 literal")
}

pub fn gallery(name: GalleryName) -> OperatorTuple {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mats = match name {
        GalleryName::Pauli => vec![
            m2([[o, l], [l, o]]),
            m2([[o, -i], [i, o]]),
            m2([[l, o], [o, -l]]),
        ],
        GalleryName::D2 => vec![m2([[o, l], [o, o]]), m2([[l, o], [o, -l]])],
        GalleryName::Ex2 => vec![m2([[l, o], [o, o]]), m2([[o, o], [l, o]])],
    };
    OperatorTuple::new(mats).expect("gallery tuples are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_entries() {
        let p = gallery(GalleryName::Pauli);
        let i = Complex64::new(0.0, 1.0);
        assert_eq!(p.get(0)[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(p.get(1)[(0, 1)], -i);
        assert_eq!(p.get(1)[(1, 0)], i);
        assert_eq!(p.get(2)[(1, 1)], Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn d2_is_half_sigma1_plus_i_sigma2() {
        let p = gallery(GalleryName::Pauli);
        let d2 = gallery(GalleryName::D2);
        let mut raising = p.get(0).clone();
        raising.axpy(Complex64::new(0.0, 1.0), p.get(1));
        assert_eq!(raising.scale_real(0.5), *d2.get(0));
        assert_eq!(p.get(2), d2.get(1));
    }

    #[test]
    fn ex2_entries() {
        let e = gallery(GalleryName::Ex2);
        assert_eq!(e.get(0)[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(e.get(1)[(1, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(e.get(1)[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn parse_names() {
        assert_eq!("PAULI".parse::<GalleryName>().unwrap(), GalleryName::Pauli);
        assert!(matches!("nope".parse::<GalleryName>(), Err(OtkError::UnknownName(_))));
    }
}
