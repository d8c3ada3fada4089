//! One structured record per run, printed as JSON, CSV or text.

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

use pcteq::closeness::{SampleSizeMode, TeqParams};
use pcteq::rational::{to_f64, to_text, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Json,
    Csv,
    Text,
}

pub const CSV_HEADER: &str = "benchmark,eps,eta,dtv,result,seconds";

#[derive(Debug, Default, Serialize)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SampleSizeMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Params {
    pub fn teq(p: &TeqParams, seed: u64) -> Self {
        Params {
            eps: Some(to_text(&p.eps)),
            eta: Some(to_text(&p.eta)),
            delta: Some(to_text(&p.delta)),
            mode: Some(p.mode),
            seed: Some(seed),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub benchmark: String,
    pub inputs: Vec<String>,
    pub params: Params,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<u64>,
    pub result: Value,
    /// Wall time; the only field that varies between identical runs.
    pub seconds: f64,
    #[serde(skip)]
    pub value: Option<String>,
    #[serde(skip)]
    pub dtv: Option<Rational>,
    #[serde(skip)]
    pub format: Output,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl RunRecord {
    pub fn new(subcommand: &'static str, format: Output) -> Self {
        RunRecord {
            subcommand,
            benchmark: String::new(),
            inputs: Vec::new(),
            params: Params::default(),
            verdict: None,
            m: None,
            skipped: None,
            result: Value::Null,
            seconds: 0.0,
            value: None,
            dtv: None,
            format,
        }
    }

    /// Row in the `benchmark,eps,eta,dtv,result,seconds` layout.
    pub fn csv_row(&self) -> String {
        let benchmark = if self.benchmark.is_empty() { self.inputs.first().cloned().unwrap_or_default() } else { self.benchmark.clone() };
        let dtv = self.dtv.as_ref().map(|d| format!("{:.3}", to_f64(d))).unwrap_or_default();
        let result = self.verdict.as_deref().map(|v| if v == "accept" { "A" } else { "R" }.to_string());
        let result = result.or_else(|| self.value.clone()).unwrap_or_default();
        let rat = |s: &Option<String>| s.as_deref().and_then(|t| pcteq::rational::parse_rational(t).ok());
        let num = |s: &Option<String>| rat(s).map(|r| format!("{}", to_f64(&r))).unwrap_or_default();
        [
            csv_field(&benchmark),
            num(&self.params.eps),
            num(&self.params.eta),
            dtv,
            csv_field(&result),
            format!("{:.3}", self.seconds),
        ]
        .join(",")
    }

    pub fn print(&self) {
        match self.format {
            Output::Json => println!("{}", serde_json::to_string(self).expect("record serializes")),
            Output::Csv => {
                println!("{CSV_HEADER}");
                println!("{}", self.csv_row());
            }
            Output::Text => {
                if let Some(v) = &self.verdict {
                    println!("{}", v.to_uppercase());
                }
                if let Some(seed) = self.params.seed {
                    println!("seed: {seed}");
                }
                if let Some(m) = self.m {
                    println!("m: {m}");
                }
                if let Some(s) = self.skipped {
                    println!("skipped: {s}");
                }
                if let Some(d) = &self.dtv {
                    println!("dtv: {} ({:.6})", to_text(d), to_f64(d));
                }
                match (&self.value, &self.result) {
                    (Some(v), Value::Object(map)) if map.contains_key("samples") => {
                        println!("{v}");
                        for s in map["samples"].as_array().into_iter().flatten() {
                            println!("{}", s.as_str().unwrap_or_default());
                        }
                    }
                    (Some(v), _) => println!("{v}"),
                    (None, Value::Object(map)) => {
                        for (k, v) in map {
                            println!("{k}: {}", v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()));
                        }
                    }
                    _ => {}
                }
            }
        }
    }
}
