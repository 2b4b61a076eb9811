//! Hamiltonians `F(ξ)` in action coordinates: parsing, models and exact
//! second-order jets.

pub mod builtin;
pub mod dual;
pub mod expr;
pub mod model;

pub use builtin::{builtin, default_region, BuiltinParams, BUILTIN_NAMES};
pub use expr::{parse_expr, Expr, ParseError, ParseErrorKind};
pub use model::{
    eval_expr, EvalError, Exclusion, HamiltonianModel, Jet2, ModelDocument, ModelError, Point,
    Region, RegionError, DEFAULT_GUARD_RADIUS,
};

/// Parse `text` as a Hamiltonian of dimension `dim`.
pub fn parse(text: &str, dim: usize) -> Result<HamiltonianModel, ModelError> {
    HamiltonianModel::parse(text, dim)
}

/// Second-order jet of `model` at `p`.
pub fn eval_jet2(model: &HamiltonianModel, p: &Point) -> Result<Jet2, EvalError> {
    model.eval_jet2(p)
}
