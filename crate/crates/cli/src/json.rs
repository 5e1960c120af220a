//! Canonical JSON: sorted keys, two-space indentation and every float
//! written with 17 significant digits, so that parsing and re-serializing a
//! document reproduces it byte for byte.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};
use serde_json::Value;

struct Canonical<'a>(PrettyFormatter<'a>);

impl Formatter for Canonical<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Canonical text of any serializable value, newline-terminated.
///
/// The value is routed through [`Value`], whose maps are ordered, so struct
/// field order does not leak into the output.
pub fn to_canonical<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Canonical(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// Parses and re-emits a JSON document in canonical form.
pub fn recanonicalize(text: &str) -> serde_json::Result<String> {
    let value: Value = serde_json::from_str(text)?;
    to_canonical(&value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_and_floats_fixed_width() {
        let text = to_canonical(&json!({"b": 0.1, "a": [1, -2.5e-300]})).unwrap();
        assert_eq!(
            text,
            "{\n  \"a\": [\n    1,\n    -2.5000000000000000e-300\n  ],\n  \"b\": 1.0000000000000001e-1\n}\n"
        );
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = to_canonical(&json!({"x": [std::f64::consts::PI, 1e22, 5e-324, 0.0]})).unwrap();
        assert_eq!(recanonicalize(&text).unwrap(), text);
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["x"][0].as_f64().unwrap(), std::f64::consts::PI);
        assert_eq!(back["x"][2].as_f64().unwrap(), 5e-324);
    }
}
