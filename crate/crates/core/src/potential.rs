use std::fmt;
use std::sync::Arc;

/// Real scalar potential of one spatial variable.
///
/// Used both as the mechanical potential `V` and as the metric deformation
/// `u` of the curved kernel.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `slope * x`
    Linear { slope: f64 },
    /// `stiffness * x^2 / 2`
    Harmonic { stiffness: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Potential {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Potential::Custom(Arc::new(f))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Linear { slope } => slope * x,
            Potential::Harmonic { stiffness } => 0.5 * stiffness * x * x,
            Potential::Custom(f) => f(x),
        }
    }

    pub fn gradient(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Linear { slope } => *slope,
            Potential::Harmonic { stiffness } => stiffness * x,
            Potential::Custom(f) => {
                let h = 1e-5 * (1.0 + x.abs());
                (f(x + h) - f(x - h)) / (2.0 * h)
            }
        }
    }

    pub fn curvature(&self, x: f64) -> f64 {
        match self {
            Potential::Zero | Potential::Linear { .. } => 0.0,
            Potential::Harmonic { stiffness } => *stiffness,
            Potential::Custom(f) => {
                let h = 1e-4 * (1.0 + x.abs());
                (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }
}

impl Default for Potential {
    fn default() -> Self {
        Potential::Zero
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Linear { slope } => write!(f, "Linear {{ slope: {slope} }}"),
            Potential::Harmonic { stiffness } => write!(f, "Harmonic {{ stiffness: {stiffness} }}"),
            Potential::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}
