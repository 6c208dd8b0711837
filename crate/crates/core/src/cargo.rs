//! Cargo classes and revenue.

use serde::{Deserialize, Serialize};

use crate::sets::TransportIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Size {
    Twenty,
    Forty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightClass {
    Light,
    Medium,
    Heavy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Customer {
    Spot,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CargoClass {
    /// Position in the full catalog.
    pub id: usize,
    pub size: Size,
    pub weight_class: WeightClass,
    pub customer: Customer,
    pub teu: f64,
    pub weight: f64,
}

impl CargoClass {
    pub fn new(size: Size, weight_class: WeightClass, customer: Customer) -> Self {
        let s = match size {
            Size::Twenty => 0,
            Size::Forty => 1,
        };
        let w = match weight_class {
            WeightClass::Light => 0,
            WeightClass::Medium => 1,
            WeightClass::Heavy => 2,
        };
        let c = match customer {
            Customer::Spot => 0,
            Customer::Long => 1,
        };
        Self {
            id: s * 6 + w * 2 + c,
            size,
            weight_class,
            customer,
            teu: (s + 1) as f64,
            weight: (w + 1) as f64,
        }
    }

    pub fn label(&self) -> String {
        let s = match self.size {
            Size::Twenty => "20ft",
            Size::Forty => "40ft",
        };
        format!("{s}/{:?}/{:?}", self.weight_class, self.customer)
    }
}

/// The 12 classes ordered size-major, then weight, then customer.
/// The position of a class equals its `id`.
pub fn cargo_catalog() -> Vec<CargoClass> {
    let mut out = Vec::with_capacity(12);
    for size in [Size::Twenty, Size::Forty] {
        for wc in [WeightClass::Light, WeightClass::Medium, WeightClass::Heavy] {
            for cu in [Customer::Spot, Customer::Long] {
                out.push(CargoClass::new(size, wc, cu));
            }
        }
    }
    out
}

/// Revenue per container, laid out `tr * |K| + k`.
pub fn revenue_matrix(ti: &TransportIndex, classes: &[CargoClass], lr: f64, sr: f64) -> Vec<f64> {
    let mut rev = Vec::with_capacity(ti.len() * classes.len());
    for &(i, j) in ti.pairs() {
        let span = (j - i) as f64;
        for cls in classes {
            rev.push(match cls.customer {
                Customer::Long => span * (1.0 - lr) + sr,
                Customer::Spot => span + sr,
            });
        }
    }
    rev
}
