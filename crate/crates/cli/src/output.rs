use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliResult;

/// Files of a run, kept in memory until everything has succeeded.
#[derive(Default)]
pub struct RunFiles {
    files: Vec<(String, Vec<u8>)>,
}

impl RunFiles {
    pub fn bytes(&mut self, name: &str, data: Vec<u8>) {
        self.files.push((name.to_string(), data));
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut data = serde_json::to_vec_pretty(value)?;
        data.push(b'\n');
        self.bytes(name, data);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> qcompare::Result<()>) -> CliResult<()> {
        let mut data = Vec::new();
        write(&mut data)?;
        self.bytes(name, data);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn write_to(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (name, data) in &self.files {
            let p = dir.join(name);
            fs::write(&p, data)?;
            out.push(p);
        }
        Ok(out)
    }
}

pub fn tool_info() -> serde_json::Value {
    serde_json::json!({"name": "qcompare", "version": env!("CARGO_PKG_VERSION")})
}
