use std::io::Write;

use serde::Serialize;

use super::{DatasetReport, Verdict};
use crate::classifier::Label;
use crate::error::{Error, Result};

/// Significant digits used by default in reports.
pub const DEFAULT_DIGITS: usize = 6;
/// Enough digits to round-trip any `f64`.
pub const FULL_DIGITS: usize = 17;

pub const CSV_HEADER: [&str; 7] = ["index", "p0", "p1", "v2", "cos_theta_min", "delta", "class"];

/// One line of a verification table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportRow {
    pub index: usize,
    pub p0: f64,
    pub p1: f64,
    pub v2: f64,
    pub cos_theta_min: Option<f64>,
    pub delta: Option<f64>,
    pub class: Label,
}

impl ReportRow {
    pub fn from_verdict(index: usize, verdict: &Verdict) -> Self {
        match *verdict {
            Verdict::Certified(r) => Self {
                index,
                p0: r.p0,
                p1: r.p1,
                v2: r.v2,
                cos_theta_min: Some(r.cos_theta_min),
                delta: Some(r.delta),
                class: r.label,
            },
            Verdict::Unclassifiable { p0, p1, v2 } => Self {
                index,
                p0,
                p1,
                v2,
                cos_theta_min: None,
                delta: None,
                class: Label::Unknown,
            },
        }
    }

    fn fields(&self, digits: usize) -> [String; 7] {
        let opt = |x: Option<f64>| x.map(|x| format_significant(x, digits)).unwrap_or_default();
        [
            self.index.to_string(),
            format_significant(self.p0, digits),
            format_significant(self.p1, digits),
            format_significant(self.v2, digits),
            opt(self.cos_theta_min),
            opt(self.delta),
            self.class.to_string(),
        ]
    }
}

/// `%g`-style formatting: `digits` significant digits, trailing zeros
/// dropped, scientific notation outside `[1e-4, 10^digits)`.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        return format!(
            "{mantissa}e{}{:02}",
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        );
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl DatasetReport {
    pub fn write_csv<W: Write>(&self, out: W, digits: usize) -> Result<()> {
        let to_err = |e: csv::Error| Error::InvalidConfig(format!("CSV output: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(to_err)?;
        for row in self.rows() {
            w.write_record(row.fields(digits)).map_err(to_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidConfig(format!("CSV output: {e}")))
    }

    pub fn to_csv_string(&self, digits: usize) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, digits).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct JsonReport<'a> {
            epsilon: f64,
            n: usize,
            rows: Vec<ReportRow>,
            summary: &'a super::DatasetSummary,
        }
        serde_json::to_string_pretty(&JsonReport {
            epsilon: self.epsilon,
            n: self.n,
            rows: self.rows(),
            summary: &self.summary,
        })
        .expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::{verify_p0_values, VerifierConfig};

    #[test]
    fn significant_digits_match_table_style() {
        assert_eq!(format_significant(0.000123486_3, 6), "0.000123486");
        assert_eq!(format_significant(0.999876_04, 6), "0.999876");
        assert_eq!(format_significant(0.000113859_8, 6), "0.00011386");
        assert_eq!(format_significant(-0.045849894, 6), "-0.0458499");
        assert_eq!(format_significant(0.99999999, 6), "1");
        assert_eq!(format_significant(1.5e-7, 6), "1.5e-07");
        assert_eq!(format_significant(1234567.0, 6), "1.23457e+06");
        assert_eq!(format_significant(0.0, 6), "0");
        assert_eq!(format_significant(12.0, 6), "12");
        assert_eq!(format_significant(0.0000247917, 6), "2.47917e-05");
    }

    #[test]
    fn full_precision_round_trips() {
        for x in [
            0.1,
            1.0 / 3.0,
            0.000123486346,
            -2.5e-9,
            std::f64::consts::PI,
        ] {
            let s = format_significant(x, FULL_DIGITS);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn csv_layout() {
        let config = VerifierConfig::new(0.01, 8).unwrap();
        let report = verify_p0_values(&[0.625719, 0.5], &config).unwrap();
        let csv = report.to_csv_string(DEFAULT_DIGITS);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,p0,p1,v2,cos_theta_min,delta,class");
        assert_eq!(
            lines[1],
            "0,0.625719,0.374281,0.0157457,0.999886,0.00011386,0"
        );
        assert_eq!(lines[2], "1,0.5,0.5,0,,,unknown");
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["rows"][0]["class"], "zero");
        assert_eq!(json["summary"]["unclassifiable"], 1);
    }
}
