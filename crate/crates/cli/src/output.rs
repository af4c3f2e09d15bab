use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use serde::Serialize;
use serde_json::{json, Value};

use qpolar::ensemble::RhoTable;

use crate::{Cli, Format};

pub enum Failure {
    Usage(String),
    Precondition { kind: String, message: String },
    Invariant(String),
}

impl Failure {
    fn parts(&self) -> (&str, &str, u8) {
        match self {
            Failure::Usage(m) => ("usage", m, 2),
            Failure::Precondition { kind, message } => (kind, message, 3),
            Failure::Invariant(m) => ("invariant", m, 4),
        }
    }

    pub fn report(self) -> ExitCode {
        let (kind, message, code) = self.parts();
        eprintln!("{}", json!({ "error": kind, "message": message }));
        ExitCode::from(code)
    }
}

impl From<qpolar::Error> for Failure {
    fn from(e: qpolar::Error) -> Self {
        let debug = format!("{e:?}");
        let kind = debug
            .split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or("error")
            .to_string();
        Failure::Precondition {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Precondition {
            kind: "Io".into(),
            message: e.to_string(),
        }
    }
}

pub struct Output<'a> {
    cli: &'a Cli,
    sink: Box<dyn Write>,
}

impl<'a> Output<'a> {
    pub fn new(cli: &'a Cli) -> Result<Self, Failure> {
        let sink: Box<dyn Write> = match &cli.config.output {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Output { cli, sink })
    }

    fn command_name(&self) -> String {
        match serde_json::to_value(&self.cli.command) {
            Ok(Value::Object(map)) => map.keys().next().cloned().unwrap_or_default(),
            Ok(Value::String(s)) => s,
            _ => String::new(),
        }
    }

    fn envelope(&self, result: Value) -> Result<Value, Failure> {
        let config = serde_json::to_value(self.cli).map_err(|e| Failure::Invariant(e.to_string()))?;
        Ok(json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command_name(),
            "config": config,
            "result": result,
        }))
    }

    pub fn emit(&mut self, result: Value, csv: (&str, Vec<Vec<String>>)) -> Result<(), Failure> {
        match self.cli.config.format.unwrap_or(Format::Json) {
            Format::Json => {
                let doc = self.envelope(result)?;
                serde_json::to_writer_pretty(&mut self.sink, &doc).map_err(io::Error::from)?;
                writeln!(self.sink)?;
            }
            Format::Csv => {
                writeln!(self.sink, "{}", csv.0)?;
                for row in csv.1 {
                    writeln!(self.sink, "{}", row.join(","))?;
                }
            }
        }
        Ok(())
    }

    pub fn emit_report<T: Serialize>(
        &mut self,
        report: &T,
        header: &str,
        row: impl Fn(&T) -> Vec<String>,
    ) -> Result<(), Failure> {
        let value = serde_json::to_value(report).map_err(|e| Failure::Invariant(e.to_string()))?;
        self.emit(value, (header, vec![row(report)]))
    }

    /// Exact tables default to the plain `i d num/den` text format.
    pub fn emit_rho(&mut self, table: &RhoTable) -> Result<(), Failure> {
        let cells = || {
            (0..table.m()).flat_map(move |i| {
                (0..=table.m()).map(move |d| {
                    let r = table.get(i, d);
                    (i, d, format!("{}/{}", r.numer(), r.denom()), table.value(i, d))
                })
            })
        };
        match self.cli.config.format {
            None => table.write(&mut self.sink)?,
            Some(_) => {
                let rows = cells()
                    .map(|(i, d, exact, v)| vec![i.to_string(), d.to_string(), exact, qpolar::numeric::fmt_real(v)])
                    .collect();
                let value: Vec<Value> = cells()
                    .map(|(i, d, exact, v)| json!({ "i": i, "d": d, "rho": exact, "value": v }))
                    .collect();
                let result = json!({ "m": table.m(), "q": table.q(), "cells": value });
                self.emit(result, ("i,d,rho,value", rows))?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.sink.flush()?;
        Ok(())
    }
}
