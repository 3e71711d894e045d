use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

/// Everything needed to reproduce one command's output. Rendered as `#`
/// comment lines above the report body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub params: BTreeMap<String, String>,
    /// (input name, sha256 hex) in the order the inputs were read.
    pub inputs: Vec<(String, String)>,
    pub version: String,
    pub seed: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            params: BTreeMap::new(),
            inputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: 0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, name: &str, content: &[u8]) -> &mut Self {
        self.inputs.push((name.to_string(), sha256_hex(content)));
        self
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "# command: {}\n# version: {}\n# seed: {}\n",
            self.command, self.version, self.seed
        );
        for (k, v) in &self.params {
            s.push_str(&format!("# param {k}: {v}\n"));
        }
        for (name, digest) in &self.inputs {
            s.push_str(&format!("# input {name}: sha256:{digest}\n"));
        }
        s
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.render().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_tracks_content() {
        let mut a = RunManifest::new("dse");
        a.param("lanes", "1,2").input("params", b"x");
        let b = a.clone();
        assert_eq!(a.digest(), b.digest());
        a.param("lanes", "1");
        assert_ne!(a.digest(), b.digest());
        assert!(b.render().lines().all(|l| l.starts_with("# ")));
    }

    #[test]
    fn known_sha() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
