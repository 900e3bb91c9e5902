//! Instance documents (JSON) and deterministic serialization.
//!
//! ```json
//! { "n": 2,
//!   "distribution": [{"prob": 1.0, "valuation": {"kind": "additive", "values": [1, 2]}}],
//!   "menu": {"semantics": "buymany",
//!            "entries": [{"allocation": [{"set": [0], "prob": 1.0}], "price": 1.0}]} }
//! ```
//!
//! Table values are indexed by bitmask (`index = Σ 2^i` over members); XOS
//! values are a list of clause arrays.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ItemSet, Lottery, Menu, Semantics, TypeDistribution, Valuation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub n: usize,
    pub distribution: Vec<AtomDoc>,
    #[serde(default)]
    pub menu: MenuDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomDoc {
    pub prob: f64,
    pub valuation: ValuationDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuationDoc {
    pub kind: String,
    pub values: ValuesDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValuesDoc {
    Flat(Vec<f64>),
    Clauses(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MenuDoc {
    pub semantics: String,
    #[serde(default)]
    pub entries: Vec<LotteryDoc>,
}

impl Default for MenuDoc {
    fn default() -> Self {
        MenuDoc {
            semantics: Semantics::BuyOne.name().to_string(),
            entries: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LotteryDoc {
    pub allocation: Vec<SetProbDoc>,
    pub price: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetProbDoc {
    pub set: Vec<usize>,
    pub prob: f64,
}

/// A validated instance: distribution plus menu.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub distribution: TypeDistribution,
    pub menu: Menu,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.distribution.n()
    }
}

fn at(path: &str, err: Error) -> Error {
    match err {
        Error::Input { path: p, message } => Error::Input {
            path: format!("{path}.{p}"),
            message,
        },
        Error::Invariant { path: p, message } => Error::Invariant {
            path: format!("{path}.{p}"),
            message,
        },
        other => other,
    }
}

pub fn valuation_from_doc(doc: &ValuationDoc, n: usize) -> Result<Valuation> {
    let flat = || match &doc.values {
        ValuesDoc::Flat(v) => Ok(v.clone()),
        ValuesDoc::Clauses(_) => Err(Error::input("values", "expected a flat list of numbers")),
    };
    let v = match doc.kind.as_str() {
        "table" => Valuation::table(n, flat()?)?,
        "additive" => Valuation::additive(flat()?)?,
        "unitdemand" => Valuation::unit_demand(flat()?)?,
        "xos" => {
            let clauses = match &doc.values {
                ValuesDoc::Clauses(c) => c.clone(),
                ValuesDoc::Flat(v) if v.is_empty() => Vec::new(),
                ValuesDoc::Flat(_) => return Err(Error::input("values", "XOS values must be a list of clause arrays")),
            };
            Valuation::xos(n, clauses)?
        }
        other => return Err(Error::input("kind", format!("unknown valuation kind {other:?} (expected table, additive, unitdemand or xos)"))),
    };
    if v.n() != n {
        return Err(Error::input("values", format!("valuation has {} items, document n = {n}", v.n())));
    }
    Ok(v)
}

pub fn valuation_to_doc(v: &Valuation) -> ValuationDoc {
    let values = match v {
        Valuation::Table { values, .. } => ValuesDoc::Flat(values.clone()),
        Valuation::Additive(w) | Valuation::UnitDemand(w) => ValuesDoc::Flat(w.clone()),
        Valuation::Xos { clauses, .. } => ValuesDoc::Clauses(clauses.clone()),
    };
    ValuationDoc {
        kind: v.kind().name().to_string(),
        values,
    }
}

pub fn lottery_from_doc(doc: &LotteryDoc, n: usize) -> Result<Lottery> {
    let mut allocation = Vec::with_capacity(doc.allocation.len());
    for (k, sp) in doc.allocation.iter().enumerate() {
        let set = ItemSet::from_items(sp.set.iter().copied(), n).map_err(|e| at(&format!("allocation[{k}]"), e))?;
        allocation.push((set, sp.prob));
    }
    Lottery::new(allocation, doc.price)
}

pub fn lottery_to_doc(l: &Lottery) -> LotteryDoc {
    LotteryDoc {
        allocation: allocation_to_doc(l.allocation()),
        price: l.price(),
    }
}

pub fn allocation_to_doc(allocation: &[(ItemSet, f64)]) -> Vec<SetProbDoc> {
    allocation
        .iter()
        .map(|&(s, p)| SetProbDoc {
            set: s.items().collect(),
            prob: p,
        })
        .collect()
}

pub fn menu_from_doc(doc: &MenuDoc, n: usize) -> Result<Menu> {
    let semantics = Semantics::parse(&doc.semantics).map_err(|e| at("menu", e))?;
    let mut entries = Vec::with_capacity(doc.entries.len());
    for (k, e) in doc.entries.iter().enumerate() {
        entries.push(lottery_from_doc(e, n).map_err(|err| at(&format!("menu.entries[{k}]"), err))?);
    }
    Menu::new(n, entries, semantics)
}

pub fn menu_to_doc(m: &Menu) -> MenuDoc {
    MenuDoc {
        semantics: m.semantics().name().to_string(),
        entries: m.entries().iter().map(lottery_to_doc).collect(),
    }
}

pub fn distribution_to_doc(d: &TypeDistribution) -> Vec<AtomDoc> {
    d.atoms()
        .iter()
        .map(|a| AtomDoc {
            prob: a.prob,
            valuation: valuation_to_doc(&a.valuation),
        })
        .collect()
}

/// Validates a parsed document into an [`Instance`]. Errors carry the JSON
/// path of the offending field.
pub fn instance_from_doc(doc: &InstanceDoc) -> Result<Instance> {
    let n = doc.n;
    let mut atoms = Vec::with_capacity(doc.distribution.len());
    for (k, a) in doc.distribution.iter().enumerate() {
        let v = valuation_from_doc(&a.valuation, n).map_err(|e| at(&format!("distribution[{k}].valuation"), e))?;
        atoms.push((a.prob, v));
    }
    let distribution = TypeDistribution::new(atoms)?;
    let menu = menu_from_doc(&doc.menu, n)?;
    Ok(Instance { distribution, menu })
}

pub fn instance_to_doc(inst: &Instance) -> InstanceDoc {
    InstanceDoc {
        n: inst.n(),
        distribution: distribution_to_doc(&inst.distribution),
        menu: menu_to_doc(&inst.menu),
    }
}

/// Parses and validates an instance document.
pub fn load_instance(json: &str) -> Result<Instance> {
    let doc: InstanceDoc = serde_json::from_str(json).map_err(|e| Error::input("$", e.to_string()))?;
    instance_from_doc(&doc)
}

/// Serializes an instance with the deterministic float format.
pub fn save_instance(inst: &Instance) -> String {
    to_json_string(&instance_to_doc(inst))
}

/// Formats a float like C's `%.17g`, keeping a decimal point or exponent
/// so the token still reads as a float.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "Infinity".into() } else { "-Infinity".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let out = if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_fraction(&fixed)
    } else {
        format!("{}e{}", trim_fraction(mantissa), exp)
    };
    if out.contains('.') || out.contains('e') {
        out
    } else {
        format!("{out}.0")
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0');
        t.trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

struct G17Formatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            writer.write_all(format_g17(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Pretty JSON with struct field order preserved and floats written with 17
/// significant digits. Non-finite floats become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let fmt = G17Formatter {
        inner: serde_json::ser::PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf-8 JSON")
}

/// Infinity-aware float helper for reports: `None` for infinite values.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_loads() {
        let inst = load_instance(
            r#"{"n":1,"distribution":[{"prob":1.0,"valuation":{"kind":"additive","values":[2.0]}}],
                "menu":{"semantics":"buyone","entries":[]}}"#,
        )
        .unwrap();
        assert_eq!(inst.n(), 1);
        assert!(inst.menu.is_empty());
    }

    #[test]
    fn monotonicity_error_reports_path() {
        let err = load_instance(
            r#"{"n":2,"distribution":[{"prob":1.0,"valuation":{"kind":"table","values":[0,3,0,2]}}],
                "menu":{"semantics":"buyone","entries":[]}}"#,
        )
        .unwrap_err();
        match err {
            Error::Invariant { path, .. } => assert!(path.starts_with("distribution[0].valuation"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn probability_sum_error() {
        let err = load_instance(
            r#"{"n":1,"distribution":[{"prob":1.0,"valuation":{"kind":"additive","values":[2.0]}}],
                "menu":{"semantics":"buyone","entries":[{"allocation":[{"set":[0],"prob":0.8}],"price":1}]}}"#,
        )
        .unwrap_err();
        match err {
            Error::Invariant { path, message } => {
                assert!(path.contains("menu.entries[0]"), "{path}");
                assert!(message.contains("sum"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn xos_values_are_clause_arrays() {
        let inst = load_instance(
            r#"{"n":2,"distribution":[{"prob":1.0,"valuation":{"kind":"xos","values":[[1,0],[0,2]]}}]}"#,
        )
        .unwrap();
        assert_eq!(inst.distribution.atoms()[0].valuation.value(ItemSet::full(2)), 2.0);
    }

    #[test]
    fn g17_format() {
        assert_eq!(format_g17(4.0), "4.0");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(3.75), "3.75");
        assert_eq!(format_g17(1e-12), "9.9999999999999998e-13");
        assert_eq!(format_g17(1e20), "1e20");
        for x in [0.1, 1.0 / 3.0, 123456.789, 2.5e-7, 6.02e23] {
            let back: f64 = format_g17(x).parse().unwrap();
            assert_eq!(back, x);
        }
    }
}
