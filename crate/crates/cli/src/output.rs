//! certificates.json and CSV sweep files.

use std::fs;
use std::io;
use std::path::Path;

use scvlab_core::certificate::format_sig17;
use scvlab_core::hormander::SweepRow;
use scvlab_core::Certificate;

pub const CERTIFICATES_FILE: &str = "certificates.json";

/// A CSV file: header row then data rows, LF line endings.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    pub file_name: String,
    pub contents: String,
}

impl Csv {
    pub fn new(file_name: impl Into<String>, header: &[&str]) -> Self {
        Csv { file_name: file_name.into(), contents: format!("{}\n", header.join(",")) }
    }

    pub fn push_row(&mut self, fields: &[String]) {
        self.contents.push_str(&fields.join(","));
        self.contents.push('\n');
    }

    /// `label, coordinates..., lhs, rhs, margin` per sweep row.
    pub fn from_sweep(file_name: impl Into<String>, coordinates: &[&str], rows: &[SweepRow]) -> Self {
        let mut header = vec!["label"];
        header.extend_from_slice(coordinates);
        header.extend_from_slice(&["lhs", "rhs", "margin"]);
        let mut csv = Csv::new(file_name, &header);
        for r in rows {
            let mut fields = vec![r.label.clone()];
            fields.extend(r.point.iter().map(|&x| format_sig17(x)));
            fields.extend([r.lhs, r.rhs, r.margin].map(format_sig17));
            csv.push_row(&fields);
        }
        csv
    }
}

/// Serialized certificate array, newline terminated.
pub fn certificates_json(certs: &[Certificate]) -> String {
    let mut s = serde_json::to_string_pretty(certs).expect("certificates serialize");
    s.push('\n');
    s
}

pub fn write_outputs(dir: &Path, certs: &[Certificate], csvs: &[Csv]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CERTIFICATES_FILE), certificates_json(certs))?;
    for csv in csvs {
        fs::write(dir.join(&csv.file_name), &csv.contents)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_csv_layout() {
        let rows = vec![SweepRow { label: "a".into(), point: vec![0.5, -1.0], lhs: 1.0, rhs: 2.0, margin: 1.0 }];
        let csv = Csv::from_sweep("w.csv", &["x", "y"], &rows);
        let lines: Vec<&str> = csv.contents.split('\n').collect();
        assert_eq!(lines[0], "label,x,y,lhs,rhs,margin");
        assert!(lines[1].starts_with("a,5.0000000000000000e-1,"));
        assert_eq!(lines[2], "");
        assert!(!csv.contents.contains('\r'));
    }

    #[test]
    fn json_is_an_array_with_sig17_numbers() {
        let c = Certificate::upper_bound("x", 0.1, 0.2, 0.0);
        let s = certificates_json(&[c]);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v.is_array());
        assert!(s.contains("1.0000000000000001e-1"));
    }
}
