use serde::{Deserialize, Serialize};

/// Positive bijection `g: ℝ → (0, ∞)` applied to `∂_k f` before integration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rectifier {
    /// `g(x) = log(1 + eˣ)`.
    #[default]
    Softplus,
}

impl Rectifier {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Rectifier::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
        }
    }

    /// `g'(x)`.
    #[inline]
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Rectifier::Softplus => sigmoid(x),
        }
    }

    /// `g''(x)`.
    #[inline]
    pub fn second(self, x: f64) -> f64 {
        match self {
            Rectifier::Softplus => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }

    /// `log g(x)`, accurate for very negative `x` where `g` underflows.
    #[inline]
    pub fn ln_eval(self, x: f64) -> f64 {
        match self {
            Rectifier::Softplus => {
                if x < -30.0 {
                    x - 0.5 * x.exp()
                } else {
                    self.eval(x).ln()
                }
            }
        }
    }

    /// First and second derivatives of `log g` at `x`.
    #[inline]
    pub fn ln_derivs(self, x: f64) -> (f64, f64) {
        match self {
            Rectifier::Softplus => {
                if x < -30.0 {
                    let e = x.exp();
                    (1.0 - 0.5 * e, -0.5 * e)
                } else {
                    let g = self.eval(x);
                    let s = sigmoid(x);
                    let r = s / g;
                    (r, s * (1.0 - s) / g - r * r)
                }
            }
        }
    }

    /// `g⁻¹(y)` for `y > 0`.
    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Rectifier::Softplus => y + (-(-y).exp_m1()).ln(),
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
