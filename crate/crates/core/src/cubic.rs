//! Real roots of monic cubics by Cardano's method.

use std::f64::consts::PI;

/// Monic cubic `x^3 + b x^2 + c x + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Cubic {
    pub fn new(b: f64, c: f64, d: f64) -> Self {
        Self { b, c, d }
    }

    pub fn eval(&self, x: f64) -> f64 {
        ((x + self.b) * x + self.c) * x + self.d
    }

    fn derivative(&self, x: f64) -> f64 {
        (3.0 * x + 2.0 * self.b) * x + self.c
    }

    /// Magnitude of the largest monomial term at `x`. This is the scale at
    /// which rounding error in `eval` lives.
    pub fn term_scale(&self, x: f64) -> f64 {
        let ax = x.abs();
        [ax * ax * ax, self.b.abs() * ax * ax, self.c.abs() * ax, self.d.abs()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Residual relative to `max(1, term_scale(x))`.
    pub fn scaled_residual(&self, x: f64) -> f64 {
        self.eval(x).abs() / self.term_scale(x).max(1.0)
    }

    /// All real roots in ascending order, a double root reported once.
    ///
    /// The depressed cubic `t^3 + p t + q` (with `x = t - b/3`) gives the
    /// largest-magnitude real root in closed form: Cardano's radicals when one
    /// root is real, the trigonometric form when all three are. The other two
    /// come from the deflated quadratic. Its discriminant decides whether they
    /// are real; the cubic discriminant cancels too badly to do that when the
    /// coefficients span many orders of magnitude.
    pub fn real_roots(&self) -> Vec<f64> {
        let shift = self.b / 3.0;
        let p = self.c - self.b * self.b / 3.0;
        let q = 2.0 * self.b * self.b * self.b / 27.0 - self.b * self.c / 3.0 + self.d;
        if p == 0.0 && q == 0.0 {
            return vec![self.polish(-shift)];
        }

        let half_q = q / 2.0;
        let third_p = p / 3.0;
        let disc = half_q * half_q + third_p * third_p * third_p;
        let candidates = if disc > 0.0 {
            // Pick the radical that avoids cancellation.
            let sq = disc.sqrt();
            let a = (-half_q - half_q.signum() * sq).cbrt();
            vec![if a != 0.0 { a - third_p / a } else { 0.0 }]
        } else {
            let m = 2.0 * (-third_p).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            (0..3)
                .map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos())
                .collect()
        };
        let r = candidates
            .into_iter()
            .map(|t| self.polish(t - shift))
            .fold(0.0, |best: f64, x| if x.abs() > best.abs() { x } else { best });

        // x^3 + b x^2 + c x + d = (x - r)(x^2 + bb x + e). With r the
        // dominant root, deflating from the constant term is the stable way.
        let (bb, e) = if r != 0.0 {
            let e = -self.d / r;
            ((e - self.c) / r, e)
        } else {
            (self.b, self.c)
        };
        let qd = bb * bb - 4.0 * e;
        let mut roots = vec![r];
        if qd == 0.0 {
            roots.push(self.polish(-bb / 2.0));
        } else if qd > 0.0 {
            let h = -(bb + bb.signum() * qd.sqrt()) / 2.0;
            roots.push(self.polish(h));
            if h != 0.0 {
                roots.push(self.polish(e / h));
            }
        }
        roots.sort_by(|a, b| a.total_cmp(b));
        roots.dedup();
        roots
    }

    fn polish(&self, mut x: f64) -> f64 {
        for _ in 0..4 {
            let fx = self.eval(x);
            let dfx = self.derivative(x);
            if fx == 0.0 || dfx == 0.0 {
                break;
            }
            let next = x - fx / dfx;
            if !next.is_finite() || self.eval(next).abs() >= fx.abs() {
                break;
            }
            x = next;
        }
        x
    }
}
