//! Fixed-precision number rendering for CSV, JSON and text reports.
//!
//! Every numeric value written by the engine goes through [`sig6`] so that
//! output files are byte-stable across platforms.

/// Formats `x` with six significant digits, trailing zeros stripped.
///
/// Values with decimal exponent in `[-5, 15)` are printed positionally,
/// everything else in `d.ddddde±x` form.
pub fn sig6(x: f64) -> String {
    sig(x, 6)
}

pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    // Let the scientific formatter do the rounding, then read the exponent
    // back so that 999999.5 correctly becomes 1e6.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = strip_zeros(mantissa.to_string());
        format!("{m}e{exp}")
    }
}

fn strip_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_string()
    } else {
        t.to_string()
    }
}

/// Serde helper: serialize an `f64` through [`sig6`] as a JSON number.
pub mod json6 {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::serialize_number(*x, s)
    }

    pub mod option {
        use serde::Serializer;

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::super::serialize_number(*v, s),
                None => s.serialize_none(),
            }
        }
    }
}

fn serialize_number<S: serde::Serializer>(x: f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return s.serialize_none();
    }
    // Re-parse the rounded text so the JSON writer emits exactly that value.
    let rounded: f64 = sig6(x).parse().expect("sig6 output parses");
    s.serialize_f64(rounded)
}
