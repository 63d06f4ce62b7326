//! JSON output conventions shared by problem files and reports: numbers
//! with 17 significant digits, objects and nested arrays one entry per
//! line, arrays of scalars on a single line.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::Formatter;

/// `%.{digits}g` with Rust's exponent syntax: `digits` significant
/// digits, trailing zeros removed, exponent form outside
/// `1e-4 ≤ |x| < 10^digits`.
pub fn fmt_g(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.*e}", digits - 1);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let fixed = format!("{x:.*}", (digits as i32 - 1 - exp) as usize);
        trim_zeros(&fixed).to_string()
    }
}

/// Round-trip precision used in every file the tool writes.
pub fn g17(x: f64) -> String {
    fmt_g(x, 17)
}

/// Precision of human-readable summaries.
pub fn g6(x: f64) -> String {
    fmt_g(x, 6)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct Frame {
    nested: bool,
    empty: bool,
}

/// Pretty printer that keeps scalar arrays inline (matrix rows, vectors).
#[derive(Default)]
pub struct CompactPretty {
    indent: usize,
    stack: Vec<Frame>,
    pending: Option<bool>,
}

impl CompactPretty {
    fn newline<W: ?Sized + Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }

    /// Emits the separator owed by the last `begin_array_value`.
    fn flush<W: ?Sized + Write>(&mut self, w: &mut W, structural: bool) -> io::Result<()> {
        let Some(first) = self.pending.take() else {
            return Ok(());
        };
        let frame = self.stack.last_mut().expect("inside an array");
        frame.empty = false;
        if structural {
            frame.nested = true;
        }
        if frame.nested {
            if !first {
                w.write_all(b",")?;
            }
            self.newline(w)
        } else if !first {
            w.write_all(b", ")
        } else {
            Ok(())
        }
    }
}

macro_rules! scalar {
    ($($name:ident: $t:ty),*) => {$(
        fn $name<W: ?Sized + Write>(&mut self, w: &mut W, value: $t) -> io::Result<()> {
            self.flush(w, false)?;
            write!(w, "{value}")
        }
    )*};
}

impl Formatter for CompactPretty {
    scalar!(write_i8: i8, write_i16: i16, write_i32: i32, write_i64: i64, write_i128: i128,
            write_u8: u8, write_u16: u16, write_u32: u32, write_u64: u64, write_u128: u128);

    fn write_null<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.flush(w, false)?;
        w.write_all(b"null")
    }

    fn write_bool<W: ?Sized + Write>(&mut self, w: &mut W, value: bool) -> io::Result<()> {
        self.flush(w, false)?;
        w.write_all(if value { b"true" } else { b"false" })
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        self.flush(w, false)?;
        w.write_all(g17(value).as_bytes())
    }

    fn write_number_str<W: ?Sized + Write>(&mut self, w: &mut W, value: &str) -> io::Result<()> {
        self.flush(w, false)?;
        w.write_all(value.as_bytes())
    }

    fn begin_string<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.flush(w, false)?;
        w.write_all(b"\"")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.flush(w, true)?;
        self.indent += 1;
        self.stack.push(Frame {
            nested: false,
            empty: true,
        });
        w.write_all(b"[")
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        let frame = self.stack.pop().expect("balanced arrays");
        if frame.nested && !frame.empty {
            self.newline(w)?;
        }
        w.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, _w: &mut W, first: bool) -> io::Result<()> {
        self.pending = Some(first);
        Ok(())
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, _w: &mut W) -> io::Result<()> {
        Ok(())
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.flush(w, true)?;
        self.indent += 1;
        self.stack.push(Frame {
            nested: true,
            empty: true,
        });
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.indent -= 1;
        let frame = self.stack.pop().expect("balanced objects");
        if !frame.empty {
            self.newline(w)?;
        }
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if let Some(frame) = self.stack.last_mut() {
            frame.empty = false;
        }
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, _w: &mut W) -> io::Result<()> {
        Ok(())
    }
}

/// Serializes `value` with [`CompactPretty`] and a trailing newline.
pub fn to_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CompactPretty::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn g17_matches_printf() {
        assert_eq!(g17(0.1), "0.10000000000000001");
        assert_eq!(g17(1.0), "1");
        assert_eq!(g17(-2.5), "-2.5");
        assert_eq!(g17(10.0), "10");
        assert_eq!(g17(1e-7), "9.9999999999999995e-8");
        assert_eq!(g17(1e17), "1e17");
        assert_eq!(g17(123456.789), "123456.789");
        assert_eq!(g17(0.0), "0");
        assert_eq!(g17(1e-5), "1.0000000000000001e-5");
        assert_eq!(g6(14.692474009687782), "14.6925");
        assert_eq!(g6(27.56059), "27.5606");
        assert_eq!(g6(0.00012345678), "0.000123457");
        assert_eq!(g6(1234567.0), "1.23457e6");
        assert_eq!(g6(f64::NAN), "NaN");
    }

    #[test]
    fn g17_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, -7.25e-12, 6.02214076e23, f64::MIN_POSITIVE, f64::MAX, 14.692474009687782] {
            assert_eq!(g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn layout() {
        let v = json!({"a": [[1.0, 2.0], [3.0, 4.0]], "b": [], "c": {}, "d": "x"});
        let s = to_string(&v).unwrap();
        assert_eq!(
            s,
            "{\n  \"a\": [\n    [1, 2],\n    [3, 4]\n  ],\n  \"b\": [],\n  \"c\": {},\n  \"d\": \"x\"\n}\n"
        );
        let back: std::collections::BTreeMap<String, serde_json::Value> = serde_json::from_str(&s).unwrap();
        let a: Vec<Vec<f64>> = serde_json::from_value(back["a"].clone()).unwrap();
        assert_eq!(a, [[1.0, 2.0], [3.0, 4.0]]);
    }
}
