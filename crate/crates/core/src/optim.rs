//! Derivative-free optimizers: a bracketed golden-section maximizer for the
//! per-window exposure searches and Nelder-Mead for curve fitting.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Best point found by a 1-D search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Settings for [`maximize_around`].
#[derive(Clone, Copy, Debug)]
pub struct LineSearch {
    /// Search interval is `[center - half_width, center + half_width]`.
    pub half_width: f64,
    /// Final golden-section bracket width.
    pub tolerance: f64,
    pub max_evals: usize,
    /// Odd number of equally spaced samples scanned before refinement.
    pub prescan: usize,
}

struct Tracker<F> {
    f: F,
    best: Maximum,
}

impl<F: FnMut(f64) -> Result<f64>> Tracker<F> {
    fn eval(&mut self, x: f64) -> Result<f64> {
        let value = (self.f)(x)?;
        if !value.is_finite() {
            return Err(Error::Numerical {
                x,
                message: format!("objective returned {value}"),
            });
        }
        self.best.evaluations += 1;
        // ties keep the earlier point, so the center wins exact ties
        if value > self.best.value {
            self.best.x = x;
            self.best.value = value;
        }
        Ok(value)
    }
}

/// Maximizes `f` on a symmetric interval around `center`.
///
/// The center is evaluated first and an equally spaced grid (which contains
/// the center) picks the most promising sub-bracket, which golden-section
/// search then narrows to `tolerance`. The returned point is the best one
/// evaluated, so its value is never below `f(center)`.
pub fn maximize_around<F>(f: F, center: f64, search: &LineSearch) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(search.half_width > 0.0 && search.tolerance > 0.0 && search.max_evals >= 3) {
        return Err(Error::invalid(format!("bad line search settings {search:?}")));
    }
    let mut t = Tracker {
        f,
        best: Maximum {
            x: center,
            value: f64::NEG_INFINITY,
            evaluations: 0,
        },
    };
    let center_value = t.eval(center)?;

    let mut n = search.prescan.min(search.max_evals).max(3);
    if n % 2 == 0 {
        n -= 1;
    }
    let mid = n / 2;
    let step = search.half_width / mid as f64;
    let grid: Vec<f64> = (0..n).map(|i| center + (i as f64 - mid as f64) * step).collect();
    let mut values = Vec::with_capacity(n);
    for (i, &x) in grid.iter().enumerate() {
        values.push(if i == mid { center_value } else { t.eval(x)? });
    }
    let best = (0..n).fold(mid, |b, i| if values[i] > values[b] { i } else { b });
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(n - 1)];

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = t.eval(c)?;
    let mut fd = t.eval(d)?;
    while (b - a) > search.tolerance && t.best.evaluations < search.max_evals {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = t.eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = t.eval(d)?;
        }
    }
    Ok(t.best)
}

/// Result of a Nelder-Mead minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Nelder-Mead settings.
#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub max_iterations: usize,
    /// Stop once the simplex values agree to within this absolute spread.
    pub f_tolerance: f64,
    /// ...and its vertices lie within this distance of the best vertex.
    pub x_tolerance: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            f_tolerance: 1e-16,
            x_tolerance: 1e-12,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` from `start`, with initial simplex offsets `steps`.
    /// Non-finite objective values are treated as +infinity.
    pub fn minimize<F>(&self, mut f: F, start: &[f64], steps: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = start.len();
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };
        let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
        for i in 0..n {
            let mut v = start.to_vec();
            v[i] += steps[i];
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

        let mut iterations = 0;
        while iterations < self.max_iterations {
            iterations += 1;
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            let size = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.f_tolerance && size <= self.x_tolerance {
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let reflected = along(-1.0);
            let fr = eval(&reflected);
            if fr < values[0] {
                let expanded = along(-2.0);
                let fe = eval(&expanded);
                if fe < fr {
                    simplex[n] = expanded;
                    values[n] = fe;
                } else {
                    simplex[n] = reflected;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = reflected;
                values[n] = fr;
                continue;
            }
            let (contracted, fc) = if fr < values[n] {
                let p = along(-0.5);
                let v = eval(&p);
                (p, v)
            } else {
                let p = along(0.5);
                let v = eval(&p);
                (p, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
                continue;
            }
            // shrink toward the best vertex
            for i in 1..=n {
                let shrunk: Vec<f64> = simplex[0]
                    .iter()
                    .zip(&simplex[i])
                    .map(|(b, v)| b + 0.5 * (v - b))
                    .collect();
                values[i] = eval(&shrunk);
                simplex[i] = shrunk;
            }
        }
        let best = (0..=n).fold(0, |b, i| if values[i] < values[b] { i } else { b });
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            iterations,
        }
    }
}
