//! Scalar expressions of the point coordinates `x, y, z` (plus `r` and
//! `pi`), used for coefficients, loads and boundary data.

use std::sync::Arc;

use evalexpr::{build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value};

use crate::apps::harmonics::{real_spherical_harmonic, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::mesh::Point;

type EvalexprResultValue = EvalexprResult<Value, DefaultNumericTypes>;

struct PointContext {
    vars: [Value; 5],
    point: Point,
}

impl PointContext {
    fn new(x: &Point) -> Self {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        Self {
            vars: [
                Value::Float(x[0]),
                Value::Float(x[1]),
                Value::Float(x[2]),
                Value::Float(r),
                Value::Float(std::f64::consts::PI),
            ],
            point: *x,
        }
    }
}

fn numbers(arg: &Value, n: usize) -> EvalexprResult<Vec<f64>, DefaultNumericTypes> {
    let vals = match arg {
        Value::Tuple(t) => t.clone(),
        v => vec![v.clone()],
    };
    if vals.len() != n {
        return Err(EvalexprError::WrongFunctionArgumentAmount {
            expected: n..=n,
            actual: vals.len(),
        });
    }
    vals.iter().map(|v| v.as_number()).collect()
}

impl Context for PointContext {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value> {
        let i = ["x", "y", "z", "r", "pi"].iter().position(|v| *v == identifier)?;
        Some(&self.vars[i])
    }

    fn call_function(&self, identifier: &str, argument: &Value) -> EvalexprResultValue {
        let unary = |f: fn(f64) -> f64| -> EvalexprResultValue { Ok(Value::Float(f(numbers(argument, 1)?[0]))) };
        match identifier {
            "sin" => unary(f64::sin),
            "cos" => unary(f64::cos),
            "tan" => unary(f64::tan),
            "exp" => unary(f64::exp),
            "ln" => unary(f64::ln),
            "sqrt" => unary(f64::sqrt),
            "abs" => unary(f64::abs),
            "tanh" => unary(f64::tanh),
            "atan" => unary(f64::atan),
            "atan2" => {
                let a = numbers(argument, 2)?;
                Ok(Value::Float(a[0].atan2(a[1])))
            }
            "pow" => {
                let a = numbers(argument, 2)?;
                Ok(Value::Float(a[0].powf(a[1])))
            }
            "ylm" => {
                let a = numbers(argument, 2)?;
                let (l, m) = (a[0].round(), a[1].round());
                if !(0.0..=MAX_DEGREE as f64).contains(&l) || m.abs() > l {
                    return Err(EvalexprError::CustomMessage(format!(
                        "ylm({l}, {m}) needs 0 <= |m| <= l <= {MAX_DEGREE}"
                    )));
                }
                Ok(Value::Float(real_spherical_harmonic(l as usize, m as i64, &self.point)))
            }
            _ => Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string())),
        }
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _: bool) -> EvalexprResult<(), DefaultNumericTypes> {
        Err(EvalexprError::CustomMessage(
            "builtin functions cannot be toggled".into(),
        ))
    }
}

/// Integer literals become floats so that `1/2` means one half.
fn floatify(src: &str) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let prev_word = i > 0 && (chars[i - 1].is_alphanumeric() || chars[i - 1] == '_');
        if !c.is_ascii_digit() || prev_word {
            out.push(c);
            i += 1;
            continue;
        }
        let start = i;
        let digits = |i: &mut usize| {
            while *i < chars.len() && chars[*i].is_ascii_digit() {
                *i += 1;
            }
        };
        digits(&mut i);
        let mut float = false;
        if chars.get(i) == Some(&'.') {
            float = true;
            i += 1;
            digits(&mut i);
        }
        if matches!(chars.get(i), Some('e' | 'E')) {
            let mut j = i + 1;
            if matches!(chars.get(j), Some('+' | '-')) {
                j += 1;
            }
            if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                float = true;
                i = j;
                digits(&mut i);
            }
        }
        out.extend(&chars[start..i]);
        if !float {
            out.push_str(".0");
        }
    }
    out
}

#[derive(Clone)]
pub struct Expr {
    source: String,
    node: Arc<Node>,
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let node =
            build_operator_tree(&floatify(source)).map_err(|e| Error::Config(format!("expression `{source}`: {e}")))?;
        let expr = Self {
            source: source.to_string(),
            node: Arc::new(node),
        };
        expr.try_eval(&[0.3, -0.4, 0.5])?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn try_eval(&self, x: &Point) -> Result<f64> {
        self.node
            .eval_number_with_context(&PointContext::new(x))
            .map_err(|e| Error::Config(format!("expression `{}`: {e}", self.source)))
    }

    /// NaN on evaluation failure; coefficient sampling reports it.
    pub fn eval(&self, x: &Point) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}
