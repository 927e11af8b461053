//! CSV emission: a `# tfconc v1` header, a flags echo, then plain tables with
//! numbers at 9 significant digits.

use std::fmt::Write as _;

pub const HEADER: &str = "# tfconc v1";

/// `v` to 9 significant digits, positional for exponents in `[-5, 9)` and
/// scientific otherwise, without trailing zeros.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        trim_zeros(format!("{:.*}", (8 - exp).max(0) as usize, v))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// A CSV document under construction.
pub struct Document {
    text: String,
}

impl Document {
    pub fn new(flags: &str) -> Self {
        Self {
            text: format!("{HEADER}\n# flags: {flags}\n"),
        }
    }

    pub fn comment(&mut self, line: &str) {
        writeln!(self.text, "# {line}").expect("write to string");
    }

    pub fn header(&mut self, columns: &[&str]) {
        writeln!(self.text, "{}", columns.join(",")).expect("write to string");
    }

    pub fn row(&mut self, cells: &[String]) {
        writeln!(self.text, "{}", cells.join(",")).expect("write to string");
    }

    pub fn numbers(&mut self, values: &[f64]) {
        self.row(&values.iter().map(|&v| num(v)).collect::<Vec<_>>());
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(1.0 - (-std::f64::consts::PI).exp()), "0.956786082");
        assert_eq!(num(0.5f64.ln().abs()), "0.693147181");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-2.5), "-2.5");
        assert_eq!(num(123456789.4), "123456789");
        assert_eq!(num(1234567890.0), "1.23456789e9");
        assert_eq!(num(1.5e-7), "1.5e-7");
        assert_eq!(num(2.0e-5), "0.00002");
        assert_eq!(num(0.99999999996), "1");
    }

    #[test]
    fn documents_start_with_the_header_and_flags() {
        let mut d = Document::new("psi --d 1 --eps 0.5");
        d.header(&["d", "eps", "psi"]);
        d.numbers(&[1.0, 0.5, 0.5f64.ln().abs()]);
        assert_eq!(
            d.into_string(),
            "# tfconc v1\n# flags: psi --d 1 --eps 0.5\nd,eps,psi\n1,0.5,0.693147181\n"
        );
    }
}
