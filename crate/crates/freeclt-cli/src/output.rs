//! Deterministic machine-readable output: every floating value is printed
//! with 17 significant digits, `.` decimal separator, no locale dependence.

use freeclt_core::matlin::CMatrix;
use freeclt_core::Complex64;

/// 17 significant digits in scientific notation.
pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn complex17(z: Complex64) -> String {
    format!("[{},{}]", g17(z.re), g17(z.im))
}

pub fn matrix17(m: &CMatrix) -> String {
    let rows: Vec<String> = (0..m.dim())
        .map(|i| {
            let cells: Vec<String> = (0..m.dim()).map(|j| complex17(m[(i, j)])).collect();
            format!("[{}]", cells.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

/// Minimal JSON object writer preserving insertion order.
pub struct JsonObject {
    fields: Vec<(String, String)>,
}

impl JsonObject {
    pub fn new() -> Self {
        Self { fields: Vec::new() }
    }

    pub fn num(mut self, key: &str, value: f64) -> Self {
        self.fields.push((key.to_string(), g17(value)));
        self
    }

    pub fn int(mut self, key: &str, value: u64) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn boolean(mut self, key: &str, value: bool) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn string(mut self, key: &str, value: &str) -> Self {
        self.fields
            .push((key.to_string(), serde_json::to_string(value).expect("string")));
        self
    }

    /// Raw pre-rendered JSON value.
    pub fn raw(mut self, key: &str, value: String) -> Self {
        self.fields.push((key.to_string(), value));
        self
    }

    pub fn render(&self) -> String {
        let body: Vec<String> =
            self.fields.iter().map(|(k, v)| format!("  \"{k}\": {v}")).collect();
        format!("{{\n{}\n}}\n", body.join(",\n"))
    }
}

pub fn string_array(items: &[String]) -> String {
    let quoted: Vec<String> =
        items.iter().map(|s| serde_json::to_string(s).expect("string")).collect();
    format!("[{}]", quoted.join(","))
}
