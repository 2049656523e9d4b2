//! Dirichlet forms, flow energies and the variational characterisations of
//! expected entrance times on the torus.

mod field;
mod flow;

pub use field::{dirichlet_form, Domain, ScalarField};
pub use flow::{divergence, flow_energy, flow_out, LatticeFlow, MAX_DENSE_VERTICES};
mod torus;

pub use torus::{
    build_test_function, check_thomson_constraints, expected_hitting_exact,
    expected_hitting_field, spectral_gap, torus_dirichlet_value, torus_thomson_value,
    TestFunction, VariationalBounds, CONSTRAINT_TOL, MAX_EXACT_UNKNOWNS,
};
