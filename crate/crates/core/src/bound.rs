use std::fmt;

/// Which bound produced a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Converse,
    Achievability,
    Asymptotic,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Converse => "converse",
            BoundKind::Achievability => "achievability",
            BoundKind::Asymptotic => "asymptotic",
        })
    }
}

/// One `(average blocklength, log M)` point of a bound.
///
/// `certified` is true only when the value is a rigorous bound (exact-mode
/// converse with upward rounding). Monte Carlo and asymptotic points are never
/// certified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub avg_blocklength: f64,
    pub log_m: f64,
    pub kind: BoundKind,
    pub certified: bool,
}

impl BoundPoint {
    pub fn log_m_bits(&self) -> f64 {
        self.log_m / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub kind: BoundKind,
    pub points: Vec<BoundPoint>,
}
