//! One `key = value` manifest per run.

use std::fmt::Display;
use std::path::PathBuf;

use gkmnc::dataset::DataTable;
use gkmnc::pipeline::PipelineConfig;

pub struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, config: &PipelineConfig, table: &DataTable) -> Self {
        let mut m = Manifest { lines: Vec::new() };
        m.push("command", &command);
        m.push("dataset.rows", &table.len());
        m.push("dataset.schema_fingerprint", &table.schema().fingerprint());
        m.push("seed", &config.seed);
        for line in config.to_text().lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                m.push(&format!("config.{k}"), &v);
            }
        }
        m
    }

    pub fn push(&mut self, key: &str, value: &dyn Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn outputs(&mut self, paths: &[PathBuf]) {
        for (i, p) in paths.iter().enumerate() {
            self.push(&format!("output.{i}"), &p.display());
        }
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
