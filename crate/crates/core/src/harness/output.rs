//! Files written by the commands: field and series CSV, TOML reports and the
//! checksummed manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::diagnostics::{
    primitive_fields, q_eps_field, r_eps_field, relaxation_residual_field, total_entropy_series,
};
use crate::eos::{ConservedState, EosModel};
use crate::equilibrium::{eq_primitive, EqState};
use crate::field::SolutionField;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `x,rho_m,m,Gamma,p,u,alpha`, one block per snapshot after a `# t=` line.
pub fn fields_csv(field: &SolutionField<ConservedState>, eos: &EosModel) -> crate::Result<String> {
    let mut s = String::from("x,rho_m,m,Gamma,p,u,alpha\n");
    for (t, snap) in field.times.iter().zip(&field.states) {
        let _ = writeln!(s, "# t={}", num(*t));
        for (i, u) in snap.iter().enumerate() {
            let v = eos.prim_from_cons(u).map_err(|e| e.in_cell(i))?;
            let row = [
                field.grid.center(i),
                u.rho_m,
                u.m,
                u.gamma,
                v.p,
                v.u,
                v.alpha,
            ];
            let row: Vec<String> = row.iter().map(|x| num(*x)).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
    }
    Ok(s)
}

/// `x,rho,mom,p,u` blocks for an equilibrium solution.
pub fn eq_fields_csv(field: &SolutionField<EqState>, eos: &EosModel) -> crate::Result<String> {
    let mut s = String::from("x,rho,mom,p,u\n");
    for (t, snap) in field.times.iter().zip(&field.states) {
        let _ = writeln!(s, "# t={}", num(*t));
        for (i, (w, (p, u))) in snap.iter().zip(eq_primitive(snap, eos)?).enumerate() {
            let row = [field.grid.center(i), w.rho, w.mom, p, u];
            let row: Vec<String> = row.iter().map(|x| num(*x)).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
    }
    Ok(s)
}

/// `t,total_entropy,l2_alpha_res,l2_dxp,l2_dxu,l2_r_eps,l2_q_eps` per snapshot.
pub fn series_csv(
    field: &SolutionField<ConservedState>,
    eps: f64,
    eos: &EosModel,
) -> crate::Result<String> {
    let entropy = total_entropy_series(field, eos)?;
    let res = relaxation_residual_field(field, eos)?.l2_space();
    let (p, u, _) = primitive_fields(field, eos)?;
    let dxp = p.gradient(&field.grid).l2_space();
    let dxu = u.gradient(&field.grid).l2_space();
    let (r, _) = r_eps_field(field, eps, eos)?;
    let r = r.l2_space();
    let q = q_eps_field(field, eps, eos)?.l2_space();
    let mut s = String::from("t,total_entropy,l2_alpha_res,l2_dxp,l2_dxu,l2_r_eps,l2_q_eps\n");
    for k in 0..field.len() {
        let row = [
            field.times[k],
            entropy[k],
            res[k],
            dxp[k],
            dxu[k],
            r[k],
            q[k],
        ];
        let row: Vec<String> = row.iter().map(|x| num(*x)).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    Ok(s)
}

/// Lower-case hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub message: String,
    pub time: Option<f64>,
    pub cell: Option<usize>,
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub exit_code: i32,
    pub verdict: String,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    pub files: Vec<FileRecord>,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: String,
}

/// Collects the files a command writes and their checksums.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(root).map_err(|e| HarnessError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), HarnessError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    /// Writes `manifest.toml` through a temporary file and a rename.
    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf, HarnessError> {
        manifest.files = self.files;
        let text = toml::to_string(&manifest)
            .map_err(|e| HarnessError::Config(format!("cannot serialize manifest: {e}")))?;
        let tmp = self.root.join("manifest.toml.tmp");
        let path = self.root.join("manifest.toml");
        std::fs::write(&tmp, text).map_err(|e| HarnessError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}

pub fn to_report<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    toml::to_string(value)
        .map_err(|e| HarnessError::Config(format!("cannot serialize report: {e}")))
}
