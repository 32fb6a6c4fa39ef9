use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde_json::Value;

use super::{LatticeSymbol, Symbol, SymbolKind};
use crate::error::{Error, Result};

fn japanese(xi: [f64; 2]) -> f64 {
    (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).sqrt()
}

/// `a ≡ 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Symbol for Identity {
    fn name(&self) -> String {
        "identity".into()
    }
    fn order(&self) -> f64 {
        0.0
    }
    fn kind(&self) -> SymbolKind {
        SymbolKind::Multiplier
    }
    fn eval(&self, _x: [f64; 2], _xi: [f64; 2]) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }
}

/// `e^{-2πi|ξ|^{1-ρ}} (1+|ξ|²)^{m/2}`.
#[derive(Debug, Clone, Copy)]
pub struct Oscillatory {
    pub m: f64,
    pub rho: f64,
}

impl Symbol for Oscillatory {
    fn name(&self) -> String {
        format!("oscillatory(m={}, rho={})", self.m, self.rho)
    }
    fn order(&self) -> f64 {
        self.m
    }
    fn kind(&self) -> SymbolKind {
        SymbolKind::Multiplier
    }
    fn eval(&self, _x: [f64; 2], xi: [f64; 2]) -> Complex64 {
        let r = xi[0].hypot(xi[1]);
        Complex64::from_polar(japanese(xi).powf(self.m), -2.0 * PI * r.powf(1.0 - self.rho))
    }
}

/// `(1+|ξ|²)^{m/2}`.
#[derive(Debug, Clone, Copy)]
pub struct Bessel {
    pub m: f64,
}

impl Symbol for Bessel {
    fn name(&self) -> String {
        format!("bessel(m={})", self.m)
    }
    fn order(&self) -> f64 {
        self.m
    }
    fn kind(&self) -> SymbolKind {
        SymbolKind::Multiplier
    }
    fn eval(&self, _x: [f64; 2], xi: [f64; 2]) -> Complex64 {
        Complex64::new(japanese(xi).powf(self.m), 0.0)
    }
}

/// `sin(2πν x₁) sin(κ ξ₁ + φ) (1+|ξ|²)^{m/2}`.
#[derive(Debug, Clone, Copy)]
pub struct SinProduct {
    pub nu: f64,
    pub kappa: f64,
    pub phase: f64,
    pub m: f64,
}

impl Symbol for SinProduct {
    fn name(&self) -> String {
        format!("sin-product(nu={}, kappa={}, phase={}, m={})", self.nu, self.kappa, self.phase, self.m)
    }
    fn order(&self) -> f64 {
        self.m
    }
    fn kind(&self) -> SymbolKind {
        SymbolKind::ClosedForm
    }
    fn eval(&self, x: [f64; 2], xi: [f64; 2]) -> Complex64 {
        let v = (2.0 * PI * self.nu * x[0]).sin() * (self.kappa * xi[0] + self.phase).sin() * japanese(xi).powf(self.m);
        Complex64::new(v, 0.0)
    }
}

/// `(1+|ξ|²)^{m/2} exp(2πi A cos(2πν x₁) cos(κ|ξ|))`: a genuinely
/// x-dependent symbol of type (0, 0).
#[derive(Debug, Clone, Copy)]
pub struct Modulated {
    pub m: f64,
    pub nu: f64,
    pub kappa: f64,
    pub amp: f64,
}

impl Symbol for Modulated {
    fn name(&self) -> String {
        format!("modulated(m={}, nu={}, kappa={}, amp={})", self.m, self.nu, self.kappa, self.amp)
    }
    fn order(&self) -> f64 {
        self.m
    }
    fn kind(&self) -> SymbolKind {
        SymbolKind::ClosedForm
    }
    fn eval(&self, x: [f64; 2], xi: [f64; 2]) -> Complex64 {
        let r = xi[0].hypot(xi[1]);
        let phase = 2.0 * PI * self.amp * (2.0 * PI * self.nu * x[0]).cos() * (self.kappa * r).cos();
        Complex64::from_polar(japanese(xi).powf(self.m), phase)
    }
}

/// Reads a numeric field of a JSON parameter object, with a default.
pub fn param_f64(params: &Value, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::InvalidParameter(format!("`{key}` must be a number, got {v}"))),
    }
}

pub type SymbolFactory = Arc<dyn Fn(&Value) -> Result<Arc<dyn Symbol>> + Send + Sync>;

struct Entry {
    signature: String,
    description: String,
    factory: SymbolFactory,
}

/// Symbols constructible by name from JSON parameters.
#[derive(Default)]
pub struct SymbolRegistry {
    entries: BTreeMap<String, Entry>,
}

impl SymbolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register("identity", "a = 1", |_| Ok(Arc::new(Identity)));
        r.register("oscillatory(m,rho)", "exp(-2 pi i |xi|^(1-rho)) <xi>^m; params m, rho", |p| {
            Ok(Arc::new(Oscillatory { m: param_f64(p, "m", 0.0)?, rho: param_f64(p, "rho", 0.0)? }))
        });
        r.register("bessel(m)", "<xi>^m", |p| Ok(Arc::new(Bessel { m: param_f64(p, "m", 0.0)? })));
        r.register("sin-product(nu,kappa,phase,m)", "sin(2 pi nu x1) sin(kappa xi1 + phase) <xi>^m", |p| {
            Ok(Arc::new(SinProduct {
                nu: param_f64(p, "nu", 1.0)?,
                kappa: param_f64(p, "kappa", 1.0)?,
                phase: param_f64(p, "phase", 0.0)?,
                m: param_f64(p, "m", 0.0)?,
            }))
        });
        r.register(
            "modulated(m,nu,kappa,amp)",
            "<xi>^m exp(2 pi i amp cos(2 pi nu x1) cos(kappa |xi|))",
            |p| {
                Ok(Arc::new(Modulated {
                    m: param_f64(p, "m", 0.0)?,
                    nu: param_f64(p, "nu", 1.0)?,
                    kappa: param_f64(p, "kappa", 1.0)?,
                    amp: param_f64(p, "amp", 0.5)?,
                }))
            },
        );
        r.register("sampled(path)", "grid-sampled table, CSV x_index,xi_index,re,im", |p| {
            let path = p
                .get("path")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::InvalidParameter("`sampled` needs a string `path`".into()))?;
            let text = std::fs::read_to_string(path)?;
            Ok(Arc::new(LatticeSymbol::from_csv(path, &text)?))
        });
        r
    }

    /// `signature` is the name optionally followed by its parameter list,
    /// e.g. `oscillatory(m,rho)`; entries are built by the bare name.
    pub fn register(
        &mut self,
        signature: &str,
        description: &str,
        factory: impl Fn(&Value) -> Result<Arc<dyn Symbol>> + Send + Sync + 'static,
    ) {
        let name = signature.split('(').next().unwrap_or(signature).to_string();
        self.entries.insert(
            name,
            Entry { signature: signature.to_string(), description: description.to_string(), factory: Arc::new(factory) },
        );
    }

    pub fn build(&self, name: &str, params: &Value) -> Result<Arc<dyn Symbol>> {
        let e = self.entries.get(name).ok_or_else(|| Error::UnknownEntry(name.to_string()))?;
        (e.factory)(params)
    }

    /// `(signature, description)` pairs in name order.
    pub fn list(&self) -> Vec<(String, String)> {
        self.entries.values().map(|e| (e.signature.clone(), e.description.clone())).collect()
    }
}
