//! JSON output with every float written at six fixed decimals.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Pretty formatter that prints floats as `{:.6}`; non-finite values
/// become `null`.
pub struct FixedFloatFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for FixedFloatFormatter<'_> {
    fn default() -> Self {
        Self {
            inner: PrettyFormatter::new(),
        }
    }
}

fn write_fixed<W: ?Sized + io::Write>(w: &mut W, v: f64) -> io::Result<()> {
    if !v.is_finite() {
        return w.write_all(b"null");
    }
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        w.write_all(b"0.000000")
    } else {
        w.write_all(s.as_bytes())
    }
}

impl Formatter for FixedFloatFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_fixed(w, v)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_fixed(w, v as f64)
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

/// Serializes `value` as pretty JSON with fixed six-decimal floats and a
/// trailing newline.
pub fn to_fixed_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloatFormatter::default());
    value
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits utf-8")
}
