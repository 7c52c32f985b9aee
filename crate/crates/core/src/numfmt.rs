//! Lossless decimal formatting for 64-bit floats.
//!
//! Every float written by this crate (wire messages, checkpoints, logs) uses
//! 17 significant digits in scientific notation, which round-trips any f64
//! exactly and is byte-stable across runs.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// `v` with 17 significant digits, e.g. `1.0000000000000000e2`.
/// Non-finite values are written as `NaN`, `inf`, `-inf`.
pub fn f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON formatter writing floats with [`f64_17`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact single-line JSON with 17-digit floats.
pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Digits17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Indented JSON with 17-digit floats, newline-terminated.
pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    struct Pretty<'a> {
        inner: serde_json::ser::PrettyFormatter<'a>,
    }
    impl Formatter for Pretty<'_> {
        fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
            Digits17.write_f64(w, v)
        }
        fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.inner.begin_array(w)
        }
        fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.inner.end_array(w)
        }
        fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
            self.inner.begin_array_value(w, first)
        }
        fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.inner.end_array_value(w)
        }
        fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.inner.begin_object(w)
        }
        fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.inner.end_object(w)
        }
        fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
            self.inner.begin_object_key(w, first)
        }
        fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.inner.begin_object_value(w)
        }
        fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.inner.end_object_value(w)
        }
    }
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(
        &mut out,
        Pretty {
            inner: serde_json::ser::PrettyFormatter::new(),
        },
    );
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}
