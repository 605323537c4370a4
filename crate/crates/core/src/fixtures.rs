//! Built-in systems: the two transfer-function examples and the
//! second-order saturated loop with its exact initial conditions.

use crate::poly::Poly;
use crate::realization::{validate, TransferFunction};

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub num: Poly,
    pub den: Poly,
}

impl Fixture {
    pub fn transfer_function(&self) -> TransferFunction {
        validate(&self.num, &self.den).expect("built-in fixture is valid")
    }
}

/// `G(q) = (q - 1) / (q^2 - q + 0.5)`.
pub fn second_order_loop() -> Fixture {
    Fixture {
        name: "second-order saturated loop",
        num: Poly::new(vec![-1.0, 1.0]),
        den: Poly::new(vec![0.5, -1.0, 1.0]),
    }
}

/// Gain used with [`second_order_loop`] for the saturated simulations.
pub const LOOP2_ALPHA: f64 = -2.5;

/// Discriminant field `Q(sqrt 41)` of the closed loop at [`LOOP2_ALPHA`].
pub const LOOP2_D: u64 = 41;

/// `x0 = [-5.5 - 6.5 sqrt 41, -51]`, a point whose trajectory lands on the stable subspace.
pub const LOOP2_X0_EXACT: [&str; 2] = ["-11/2 - 13/2*sqrt(41)", "-51"];

/// Same as [`LOOP2_X0_EXACT`] with `1e-12` added to the second component.
pub const LOOP2_X0_PERTURBED: [&str; 2] = ["-11/2 - 13/2*sqrt(41)", "-51 + 1/1000000000000"];

/// `G(q) = (q^2 - 0.4q + 0.68)(q - 1) / (q^2 (q^2 + 0.5q + 0.5525))`.
pub fn example1() -> Fixture {
    Fixture {
        name: "fourth-order, relative degree one",
        num: &Poly::new(vec![0.68, -0.4, 1.0]) * &Poly::new(vec![-1.0, 1.0]),
        den: &Poly::new(vec![0.0, 0.0, 1.0]) * &Poly::new(vec![0.5525, 0.5, 1.0]),
    }
}

/// `G(q) = (q^2 - 0.1q + 0.7769)(q - 1) / (q^2 (q^2 + 0.1q + 0.7769))`.
pub fn example2() -> Fixture {
    Fixture {
        name: "fourth-order with a stable pocket above alpha_p",
        num: &Poly::new(vec![0.7769, -0.1, 1.0]) * &Poly::new(vec![-1.0, 1.0]),
        den: &Poly::new(vec![0.0, 0.0, 1.0]) * &Poly::new(vec![0.7769, 0.1, 1.0]),
    }
}
