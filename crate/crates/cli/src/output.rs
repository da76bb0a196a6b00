//! Byte-stable emission: every float is written as `{:.11e}` and files are
//! replaced atomically.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// CSV text with `#`-prefixed comment lines ahead of the header row.
pub struct Table {
    comments: Vec<String>,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table {
            comments: Vec::new(),
            writer,
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn row(&mut self, values: &[f64]) {
        self.writer
            .write_record(values.iter().map(|&v| num(v)))
            .expect("in-memory write");
    }

    /// Row whose fields are already formatted.
    pub fn raw_row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        let mut out = Vec::new();
        for c in &self.comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        out.extend(self.writer.into_inner().expect("in-memory flush"));
        out
    }
}

/// JSON formatter that prints floats in fixed scientific notation.
struct SciFormatter(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(num(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter(serde_json::ser::PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Io(format!("json encoding: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// Output directory; every write goes through [`OutDir::write`].
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    /// Writes `name` via a temporary file in the same directory and a rename.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp{}", std::process::id()));
        let io_err = |e: io::Error| CliError::Io(format!("{}: {e}", target.display()));
        {
            let mut f = std::fs::File::create(&tmp).map_err(io_err)?;
            f.write_all(bytes).map_err(io_err)?;
            f.sync_all().map_err(io_err)?;
        }
        std::fs::rename(&tmp, &target).map_err(io_err)?;
        log::info!("wrote {}", target.display());
        Ok(target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_scientific() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-0.00123), "-1.23000000000e-3");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn json_uses_fixed_floats() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Option<f64>,
            n: usize,
        }
        let text = String::from_utf8(json(&S { a: 0.5, b: None, n: 3 }).unwrap()).unwrap();
        assert!(text.contains("\"a\": 5.00000000000e-1"));
        assert!(text.contains("\"b\": null"));
        assert!(text.contains("\"n\": 3"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"], 0.5);
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["x", "y"]);
        t.comment("hello");
        t.row(&[1.0, 2.0]);
        let text = String::from_utf8(t.into_bytes()).unwrap();
        assert_eq!(text, "# hello\nx,y\n1.00000000000e0,2.00000000000e0\n");
    }
}
