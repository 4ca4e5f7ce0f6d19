//! Driving an external clang-compatible compiler.

use std::ffi::OsStr;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use thiserror::Error;

/// Where a tool path comes from: a command-line flag, then an environment
/// variable, then a default looked up on `PATH`.
#[derive(Debug, Clone, Copy)]
pub struct ToolSetting {
    pub flag: &'static str,
    pub env_var: &'static str,
    pub default: &'static str,
}

/// Compiler driver used to assemble, link and verify emitted IR.
pub const TOOLCHAIN: ToolSetting = ToolSetting {
    flag: "--toolchain",
    env_var: "CLISP_TOOLCHAIN",
    default: "clang",
};

/// C frontend used by the binding generator.
pub const C_FRONTEND: ToolSetting = ToolSetting {
    flag: "--cc",
    env_var: "CLISP_CC",
    default: "clang",
};

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("cannot run `{program}` ({reason}); pass {flag} or set {env_var}")]
    NotFound {
        program: String,
        reason: String,
        flag: &'static str,
        env_var: &'static str,
    },
    #[error("`{command}` failed ({status}):\n{stderr}")]
    Failed {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("`{command}` reported diagnostics:\n{stderr}")]
    Diagnostics { command: String, stderr: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct Toolchain {
    program: PathBuf,
    major_version: Option<u32>,
}

impl fmt::Display for Toolchain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.program.display())
    }
}

fn render(program: &Path, args: &[&OsStr]) -> String {
    let mut s = program.display().to_string();
    for a in args {
        s.push(' ');
        s.push_str(&a.to_string_lossy());
    }
    s
}

impl Toolchain {
    /// Resolves the tool from `flag_value`, the environment, or the default,
    /// and checks that it runs.
    pub fn locate(setting: ToolSetting, flag_value: Option<&Path>) -> Result<Self, ToolError> {
        let program = match flag_value {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(setting.env_var)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(setting.default)),
        };
        let not_found = |reason: String| ToolError::NotFound {
            program: program.display().to_string(),
            reason,
            flag: setting.flag,
            env_var: setting.env_var,
        };
        let output = Command::new(&program)
            .arg("--version")
            .output()
            .map_err(|e| not_found(e.to_string()))?;
        if !output.status.success() {
            return Err(not_found(format!(
                "`--version` exited with {}",
                output.status
            )));
        }
        let major_version = clang_major_version(&String::from_utf8_lossy(&output.stdout));
        Ok(Self {
            program,
            major_version,
        })
    }

    pub fn program(&self) -> &Path {
        &self.program
    }

    /// Clang before 15 reads and writes typed pointers unless told otherwise.
    fn ir_flags(&self) -> &'static [&'static str] {
        match self.major_version {
            Some(v) if v < 15 => &["-mllvm", "-opaque-pointers"],
            _ => &[],
        }
    }

    fn run(&self, args: &[&OsStr]) -> Result<Output, ToolError> {
        let mut full: Vec<&OsStr> = self.ir_flags().iter().map(OsStr::new).collect();
        full.extend_from_slice(args);
        self.run_raw(&full)
    }

    fn run_raw(&self, args: &[&OsStr]) -> Result<Output, ToolError> {
        let command = render(&self.program, args);
        let output = Command::new(&self.program)
            .args(args)
            .output()
            .map_err(|source| ToolError::Io {
                context: format!("running `{command}`"),
                source,
            })?;
        if !output.status.success() {
            return Err(ToolError::Failed {
                command,
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
            });
        }
        Ok(output)
    }

    /// Parses, verifies and compiles an `.ll` file, failing on any
    /// diagnostic, warnings included. The compiler driver disables the IR
    /// verifier for `.ll` inputs, so this goes through `-cc1` directly.
    pub fn verify(&self, ll: &Path) -> Result<(), ToolError> {
        let null = if cfg!(windows) { "NUL" } else { "/dev/null" };
        let mut args: Vec<&OsStr> = vec![OsStr::new("-cc1")];
        args.extend(self.ir_flags().iter().map(OsStr::new));
        args.extend([
            OsStr::new("-Wno-override-module"),
            OsStr::new("-emit-obj"),
            OsStr::new("-x"),
            OsStr::new("ir"),
            ll.as_os_str(),
            OsStr::new("-o"),
            OsStr::new(null),
        ]);
        let output = self.run_raw(&args)?;
        let stderr = String::from_utf8_lossy(&output.stderr);
        if !stderr.trim().is_empty() {
            return Err(ToolError::Diagnostics {
                command: render(&self.program, &args),
                stderr: stderr.into_owned(),
            });
        }
        Ok(())
    }

    /// Compiles and links `.ll` and `.c` inputs into an executable.
    pub fn link(&self, inputs: &[PathBuf], output: &Path) -> Result<(), ToolError> {
        let mut args: Vec<&OsStr> = vec![OsStr::new("-Wno-override-module"), OsStr::new("-O0")];
        args.extend(inputs.iter().map(|p| p.as_os_str()));
        args.push(OsStr::new("-o"));
        args.push(output.as_os_str());
        self.run(&args).map(drop)
    }

    /// Emits unoptimized LLVM IR for a C file.
    pub fn c_to_ir(&self, source: &Path, include_paths: &[PathBuf]) -> Result<String, ToolError> {
        let includes: Vec<String> = include_paths
            .iter()
            .map(|p| format!("-I{}", p.display()))
            .collect();
        let mut args: Vec<&OsStr> = vec![
            OsStr::new("-S"),
            OsStr::new("-emit-llvm"),
            OsStr::new("-O0"),
            OsStr::new("-w"),
        ];
        args.extend(includes.iter().map(OsStr::new));
        args.extend([source.as_os_str(), OsStr::new("-o"), OsStr::new("-")]);
        let output = self.run(&args)?;
        Ok(String::from_utf8_lossy(&output.stdout).into_owned())
    }

    /// Dumps the frontend's JSON AST for a C file.
    pub fn c_ast_json(
        &self,
        source: &Path,
        include_paths: &[PathBuf],
    ) -> Result<String, ToolError> {
        let includes: Vec<String> = include_paths
            .iter()
            .map(|p| format!("-I{}", p.display()))
            .collect();
        let mut args: Vec<&OsStr> = vec![
            OsStr::new("-fsyntax-only"),
            OsStr::new("-w"),
            OsStr::new("-Xclang"),
            OsStr::new("-ast-dump=json"),
        ];
        args.extend(includes.iter().map(OsStr::new));
        args.push(source.as_os_str());
        let output = self.run(&args)?;
        Ok(String::from_utf8_lossy(&output.stdout).into_owned())
    }
}

fn clang_major_version(version_text: &str) -> Option<u32> {
    let rest = &version_text[version_text.find("clang version ")? + "clang version ".len()..];
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}
