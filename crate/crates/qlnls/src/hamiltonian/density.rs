use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sampling::Rng64;
use rand::Rng;

/// Real density `G(x, y1, y2, y3, y4)` with analytic derivatives in `y`,
/// where `(y1, y2, y3, y4)` stands for `(u1, u2, d_x u1, d_x u2)`.
pub trait HamiltonianDensity: Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, x: f64, y: &[f64; 4]) -> f64;
    fn gradient(&self, x: f64, y: &[f64; 4]) -> [f64; 4];
    fn hessian(&self, x: f64, y: &[f64; 4]) -> [[f64; 4]; 4];
    /// Formal smoothness grade.
    fn smoothness(&self) -> u32 {
        u32::MAX
    }
}

pub type Density = Arc<dyn HamiltonianDensity>;

/// `G = 0`.
#[derive(Clone, Debug, Default)]
pub struct ZeroDensity;

impl HamiltonianDensity for ZeroDensity {
    fn name(&self) -> &str {
        "zero"
    }
    fn value(&self, _: f64, _: &[f64; 4]) -> f64 {
        0.0
    }
    fn gradient(&self, _: f64, _: &[f64; 4]) -> [f64; 4] {
        [0.0; 4]
    }
    fn hessian(&self, _: f64, _: &[f64; 4]) -> [[f64; 4]; 4] {
        [[0.0; 4]; 4]
    }
}

/// `G = kappa(x) y1 (y3^2 + sign y4^2)` with `kappa = kappa0 (1 + cos x)`.
#[derive(Clone, Debug)]
pub struct CubicDensity {
    pub kappa0: f64,
    pub sign: f64,
    name: &'static str,
}

impl CubicDensity {
    /// `kappa y1 (y3^2 + y4^2)`.
    pub fn plus(kappa0: f64) -> CubicDensity {
        CubicDensity {
            kappa0,
            sign: 1.0,
            name: "cubic-a",
        }
    }

    /// `kappa y1 (y3^2 - y4^2)`.
    pub fn minus(kappa0: f64) -> CubicDensity {
        CubicDensity {
            kappa0,
            sign: -1.0,
            name: "cubic-b",
        }
    }

    pub fn kappa(&self, x: f64) -> f64 {
        self.kappa0 * (1.0 + x.cos())
    }
}

impl HamiltonianDensity for CubicDensity {
    fn name(&self) -> &str {
        self.name
    }
    fn value(&self, x: f64, y: &[f64; 4]) -> f64 {
        self.kappa(x) * y[0] * (y[2] * y[2] + self.sign * y[3] * y[3])
    }
    fn gradient(&self, x: f64, y: &[f64; 4]) -> [f64; 4] {
        let k = self.kappa(x);
        [
            k * (y[2] * y[2] + self.sign * y[3] * y[3]),
            0.0,
            2.0 * k * y[0] * y[2],
            2.0 * k * self.sign * y[0] * y[3],
        ]
    }
    fn hessian(&self, x: f64, y: &[f64; 4]) -> [[f64; 4]; 4] {
        let k = self.kappa(x);
        let s = self.sign;
        let mut h = [[0.0; 4]; 4];
        h[0][2] = 2.0 * k * y[2];
        h[2][0] = h[0][2];
        h[0][3] = 2.0 * k * s * y[3];
        h[3][0] = h[0][3];
        h[2][2] = 2.0 * k * y[0];
        h[3][3] = 2.0 * k * s * y[0];
        h
    }
}

/// Name-indexed collection of densities; the builtins are preloaded.
pub struct DensityRegistry {
    entries: BTreeMap<String, Density>,
}

impl DensityRegistry {
    pub fn with_builtins(kappa0: f64) -> DensityRegistry {
        let mut entries: BTreeMap<String, Density> = BTreeMap::new();
        entries.insert("zero".into(), Arc::new(ZeroDensity));
        entries.insert("cubic-a".into(), Arc::new(CubicDensity::plus(kappa0)));
        entries.insert("cubic-b".into(), Arc::new(CubicDensity::minus(kappa0)));
        DensityRegistry { entries }
    }

    pub fn register(&mut self, name: &str, g: Density) {
        self.entries.insert(name.to_string(), g);
    }

    pub fn get(&self, name: &str) -> Result<Density> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "density.name: unknown density `{name}` (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

pub fn builtin(name: &str, kappa0: f64) -> Result<Density> {
    DensityRegistry::with_builtins(kappa0).get(name)
}

/// Result of sampling a density near the origin.
#[derive(Clone, Debug)]
pub struct DensityReport {
    pub origin_residual: f64,
    pub hessian_asymmetry: f64,
    pub cubic_constant: f64,
}

/// Checks vanishing to third order at `y = 0`, Hessian symmetry, and
/// estimates the constant in `|G(x, y)| <= C |y|^3` for `|y| <= 1`.
pub fn check_density(g: &dyn HamiltonianDensity, samples: usize, rng: &mut Rng64) -> Result<DensityReport> {
    let mut origin: f64 = 0.0;
    let mut asym: f64 = 0.0;
    let mut cubic: f64 = 0.0;
    let zero = [0.0; 4];
    for _ in 0..samples {
        let x = rng.gen_range(0.0..std::f64::consts::TAU);
        origin = origin.max(g.value(x, &zero).abs());
        for v in g.gradient(x, &zero) {
            origin = origin.max(v.abs());
        }
        for row in g.hessian(x, &zero) {
            for v in row {
                origin = origin.max(v.abs());
            }
        }
        let mut y = [0.0; 4];
        for v in y.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
        let h = g.hessian(x, &y);
        for i in 0..4 {
            for j in 0..4 {
                asym = asym.max((h[i][j] - h[j][i]).abs());
            }
        }
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 1e-6 {
            cubic = cubic.max(g.value(x, &y).abs() / r.powi(3));
        }
    }
    if origin > 1e-10 {
        return Err(Error::Precondition(format!(
            "density does not vanish to third order at the origin ({origin:.3e})"
        )));
    }
    if asym > 1e-12 {
        return Err(Error::Precondition(format!("hessian not symmetric ({asym:.3e})")));
    }
    Ok(DensityReport {
        origin_residual: origin,
        hessian_asymmetry: asym,
        cubic_constant: cubic,
    })
}
