//! Coefficient expression language for drift and volatility.

mod expr;
mod probe;
mod spec;

pub use expr::{BinOp, BoundExpr, EvalError, Expr, Func, Var};
pub use probe::{probe_bound, regularity_probe, Regularity, MIN_GRID};
pub use spec::{Coefficients, InitialCondition, SpecFile, Variant, WalkSpec};

/// Parse a coefficient expression.
pub fn parse_expr(text: &str) -> crate::Result<Expr> {
    Expr::parse(text)
}

/// Evaluate an expression at `(t, x)` with named parameters.
pub fn eval_expr(
    expr: &Expr,
    t: f64,
    x: f64,
    params: &std::collections::BTreeMap<String, f64>,
) -> Result<f64, EvalError> {
    expr.eval(t, x, params)
}
