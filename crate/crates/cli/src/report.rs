//! JSON rendering of certificates. Reals are written with 17 significant
//! digits; non-finite values become `null`.

use std::str::FromStr;

use ldacert::bounds::{self, Constants, LtMode};
use ldacert::certificate::Certificate;
use ldacert::FunctionalSet;
use serde_json::{Map, Number, Value};

pub fn real(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float is a JSON number"))
    } else {
        Value::Null
    }
}

fn obj(entries: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in entries {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

pub fn functionals(f: &FunctionalSet) -> Value {
    let mut e: Vec<(&str, Value)> = f.entries().iter().map(|(k, v)| (*k, real(*v))).collect();
    e.push(("theta", real(f.theta)));
    e.push(("p", real(f.p)));
    e.push(("hartree", f.hartree.map(real).unwrap_or(Value::Null)));
    obj(e)
}

pub fn constants(c: &Constants) -> Value {
    obj(vec![
        ("c_TF", real(bounds::c_tf(3))),
        ("c_LO", real(bounds::C_LO)),
        ("c_LT", real(c.c_lt())),
        ("c_LT_source", Value::String(match c.lt {
            LtMode::Conjectured => "conjectured (c_TF)".into(),
            LtMode::User(_) => "user".into(),
        })),
        ("kappa1", real(c.kinetic.kappa1)),
        ("kappa2", real(c.kinetic.kappa2)),
        ("kappa_nam", real(c.kinetic.kappa_nam)),
    ])
}

pub fn certificate(c: &Certificate, density: &str) -> Value {
    let pr = &c.params;
    let (a, b) = c.model_coefficients.map(|(a, b)| (real(a), real(b))).unwrap_or((Value::Null, Value::Null));
    let params = obj(vec![
        ("density", Value::String(density.to_string())),
        ("variant", Value::String(pr.variant.name().into())),
        ("p", real(pr.p)),
        ("theta", real(pr.theta)),
        ("C", real(pr.c)),
        ("q", real(pr.q)),
        ("model", Value::String(c.model_id.clone())),
        ("model_A", a),
        ("model_B", b),
        ("constants", constants(&c.constants)),
    ]);
    let mut rhs = vec![
        ("bulk", real(c.rhs.bulk)),
        ("kin", real(c.rhs.kin)),
        ("theta", real(c.rhs.theta)),
        ("total", real(c.rhs.total)),
    ];
    if let Some(t) = c.rhs.tf_subtraction {
        rhs.push(("tf_subtraction", real(t)));
    }
    obj(vec![
        ("params", params),
        ("functionals", functionals(&c.functionals)),
        ("lda", real(c.lda_value)),
        ("epsilon_star", real(c.eps_star)),
        ("rhs", obj(rhs)),
        ("band", Value::Array(vec![real(c.band.0), real(c.band.1)])),
        ("advisory_envelope", Value::Array(vec![real(c.advisory_envelope.0), real(c.advisory_envelope.1)])),
        ("flags", Value::Array(c.flags.iter().cloned().map(Value::String).collect())),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = serde_json::to_string(&real(x)).unwrap();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(real(f64::NAN), Value::Null);
        assert_eq!(real(f64::INFINITY), Value::Null);
    }
}
