use std::fmt::Display;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use clisp::bindgen::{self, BindError, BindRequest, BindgenResolver};
use clisp::emit;
use clisp::frontend::{parse_module, typecheck, Module};
use clisp::prelisp::{
    self, ExpandError, HostResolver, LayeredResolver, MacroResolver, ResolveError, StaticResolver,
};
use clisp::sexpr::{self, SExpr};
use clisp::toolchain::{ToolError, Toolchain, C_FRONTEND, TOOLCHAIN};

#[derive(Parser)]
#[command(
    name = "clisp",
    version,
    about = "Compiler for an S-expression dialect of C"
)]
struct Cli {
    /// Report each stage on stderr
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert S-expression source to its JSON form
    S2json(Convert),
    /// Convert JSON forms back to S-expression source
    Json2s(Convert),
    /// Run the macro preprocessor
    Expand(Expand),
    /// Type check and emit LLVM IR
    Compile(Compile),
    /// Generate declarations from C headers
    Bindgen(Bindgen),
    /// Compile, link and execute, propagating the program's exit code
    Run(Run),
}

#[derive(Args)]
struct Convert {
    /// Input file, or `-` for stdin
    input: PathBuf,
    /// Output file, or `-` for stdout (the default)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MacroSource {
    /// Macro definitions: a `.json` file of templates, or a module handed to the macro host
    #[arg(long)]
    macros: Option<PathBuf>,
    /// Macro host command [env: CLISP_MACRO_HOST] [default: macro-host]
    #[arg(long)]
    macro_host: Option<String>,
    /// C frontend used by `include` [env: CLISP_CC] [default: clang]
    #[arg(long)]
    cc: Option<PathBuf>,
    /// Include path passed to the C frontend
    #[arg(short = 'I', value_name = "DIR")]
    include: Vec<PathBuf>,
}

#[derive(Args)]
struct Expand {
    /// Input file (`.json` for JSON forms, anything else for S-expressions), or `-`
    input: PathBuf,
    /// Output file, or `-` for stdout (the default)
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    macros: MacroSource,
    /// List the macro expressions instead of expanding them
    #[arg(long)]
    dry_run: bool,
    /// Treat the input as JSON regardless of its extension
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Compile {
    /// Fully expanded input (`.json` or S-expressions), or `-`
    input: PathBuf,
    /// Output file, or `-` for stdout (the default)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Add a `main` that calls this function and returns its result
    #[arg(long)]
    entry: Option<String>,
    /// Check the output with the external toolchain
    #[arg(long)]
    verify: bool,
    /// Compiler driver [env: CLISP_TOOLCHAIN] [default: clang]
    #[arg(long)]
    toolchain: Option<PathBuf>,
    /// Treat the input as JSON regardless of its extension
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Bindgen {
    /// Headers to include
    #[arg(required = true)]
    headers: Vec<PathBuf>,
    /// Function to declare (repeatable)
    #[arg(long = "function", value_name = "NAME")]
    functions: Vec<String>,
    /// A typedef name, or `struct Tag`
    #[arg(long = "struct", value_name = "NAME")]
    structs: Vec<String>,
    /// Typedef to report as an alias (repeatable)
    #[arg(long = "typedef", value_name = "NAME")]
    typedefs: Vec<String>,
    /// Include path passed to the C frontend
    #[arg(short = 'I', value_name = "DIR")]
    include: Vec<PathBuf>,
    /// C frontend [env: CLISP_CC] [default: clang]
    #[arg(long)]
    cc: Option<PathBuf>,
    /// Output file, or `-` for stdout (the default)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Print JSON forms instead of S-expressions
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Run {
    /// Fully expanded input (`.json` or S-expressions), or `-`
    input: PathBuf,
    /// Add a `main` that calls this function and returns its result
    #[arg(long)]
    entry: Option<String>,
    /// Extra C or IR files to link in
    #[arg(long, value_name = "FILE")]
    link: Vec<PathBuf>,
    /// Compiler driver [env: CLISP_TOOLCHAIN] [default: clang]
    #[arg(long)]
    toolchain: Option<PathBuf>,
    /// Treat the input as JSON regardless of its extension
    #[arg(long)]
    json: bool,
}

/// Exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Usage = 1,
    Parse = 2,
    Macro = 3,
    Type = 4,
    Tool = 5,
}

struct Failure {
    status: Status,
    lines: Vec<String>,
}

impl Failure {
    fn new(status: Status, message: impl Display) -> Self {
        Self {
            status,
            lines: vec![message.to_string()],
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn read_input(path: &Path) -> Outcome<String> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Failure::new(Status::Usage, format!("reading stdin: {e}")))?;
        return Ok(text);
    }
    std::fs::read_to_string(path)
        .map_err(|e| Failure::new(Status::Usage, format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        None => std::io::stdout().write_all(text.as_bytes()),
        Some(p) if p == Path::new("-") => std::io::stdout().write_all(text.as_bytes()),
        Some(p) => std::fs::write(p, text),
    }
    .map_err(|e| Failure::new(Status::Usage, format!("writing output: {e}")))
}

fn is_json(path: &Path, forced: bool) -> bool {
    forced || path.extension().is_some_and(|e| e == "json")
}

fn parse_source(text: &str) -> Outcome<Vec<SExpr>> {
    sexpr::parse_sexprs(text).map_err(|e| Failure::new(Status::Parse, e))
}

fn parse_json_value(text: &str) -> Outcome<Value> {
    serde_json::from_str(text)
        .map_err(|e| Failure::new(Status::Parse, format!("invalid JSON: {e}")))
}

fn forms_from_json(value: &Value) -> Outcome<Vec<SExpr>> {
    sexpr::from_json_forms(value).map_err(|e| Failure::new(Status::Parse, e))
}

fn read_forms(path: &Path, json: bool) -> Outcome<Vec<SExpr>> {
    let text = read_input(path)?;
    if is_json(path, json) {
        forms_from_json(&parse_json_value(&text)?)
    } else {
        parse_source(&text)
    }
}

fn tool_failure(e: ToolError) -> Failure {
    Failure::new(Status::Tool, e)
}

/// Spawns the macro host on first use, so that programs whose macros are
/// all served elsewhere never need one.
struct LazyHost {
    command: Vec<String>,
    module: PathBuf,
    host: Option<HostResolver>,
}

impl LazyHost {
    fn host(&mut self) -> Result<&mut HostResolver, ResolveError> {
        if self.host.is_none() {
            self.host = Some(HostResolver::spawn(&self.command, &self.module)?);
        }
        Ok(self.host.as_mut().expect("just spawned"))
    }
}

impl MacroResolver for LazyHost {
    fn resolve_variable(&mut self, name: &str) -> Result<Value, ResolveError> {
        self.host()?.resolve_variable(name)
    }

    fn resolve_call(&mut self, name: &str, args: &[Value]) -> Result<Value, ResolveError> {
        self.host()?.resolve_call(name, args)
    }
}

fn build_resolver(source: &MacroSource, verbose: bool) -> Outcome<LayeredResolver> {
    let mut resolver = LayeredResolver::new().with(BindgenResolver::new(
        source.cc.clone(),
        source.include.clone(),
    ));
    let Some(module) = &source.macros else {
        return Ok(resolver);
    };
    if module.extension().is_some_and(|e| e == "json") {
        let defs = parse_json_value(&read_input(module)?)?;
        let r = StaticResolver::from_definitions(&defs)
            .map_err(|e| Failure::new(Status::Macro, format!("{}: {e}", module.display())))?;
        resolver.push(r);
    } else {
        let command = source
            .macro_host
            .clone()
            .or_else(|| {
                std::env::var("CLISP_MACRO_HOST")
                    .ok()
                    .filter(|v| !v.is_empty())
            })
            .unwrap_or_else(|| "macro-host".to_owned());
        if verbose {
            eprintln!("macro host: {command} {}", module.display());
        }
        let command = command.split_whitespace().map(str::to_owned).collect();
        resolver.push(LazyHost {
            command,
            module: module.clone(),
            host: None,
        });
    }
    Ok(resolver)
}

fn expand_failure(e: ExpandError) -> Failure {
    let status = if e.is_host_failure() {
        Status::Tool
    } else {
        Status::Macro
    };
    Failure::new(status, e)
}

fn cmd_expand(args: &Expand, verbose: bool) -> Outcome {
    let json = is_json(&args.input, args.json);
    let text = read_input(&args.input)?;
    let (value, forms) = if json {
        let value = parse_json_value(&text)?;
        forms_from_json(&value)?;
        (value, None)
    } else {
        let forms = parse_source(&text)?;
        (sexpr::to_json_forms(&forms), Some(forms))
    };

    if args.dry_run {
        let found = match &forms {
            Some(forms) => prelisp::scan_forms(forms),
            None => prelisp::scan_macros(&value),
        }
        .map_err(expand_failure)?;
        let listing: String = found.iter().map(|m| format!("{m}\n")).collect();
        return write_output(args.output.as_deref(), &listing);
    }

    let mut resolver = build_resolver(&args.macros, verbose)?;
    let out = match forms {
        Some(forms) => {
            let expanded = prelisp::expand_forms(&forms, &mut resolver).map_err(expand_failure)?;
            sexpr::render_forms(&expanded)
        }
        None => sexpr::render_json_forms(
            &prelisp::expand(&value, &mut resolver).map_err(expand_failure)?,
        ),
    };
    write_output(args.output.as_deref(), &out)
}

fn check(forms: &[SExpr]) -> Outcome<clisp::frontend::TypedModule> {
    let module: Module = parse_module(forms).map_err(|e| Failure::new(Status::Parse, e))?;
    typecheck(&module).map_err(|errors| Failure {
        status: Status::Type,
        lines: errors.iter().map(ToString::to_string).collect(),
    })
}

fn compile_text(input: &Path, json: bool, entry: Option<&str>) -> Outcome<String> {
    let typed = check(&read_forms(input, json)?)?;
    emit::emit_program(&typed, entry)
        .map(|m| m.text)
        .map_err(|e| Failure::new(Status::Type, e))
}

fn cmd_compile(args: &Compile, verbose: bool) -> Outcome {
    let text = compile_text(&args.input, args.json, args.entry.as_deref())?;
    if args.verify {
        let tc = Toolchain::locate(TOOLCHAIN, args.toolchain.as_deref()).map_err(tool_failure)?;
        let dir = tempfile::tempdir().map_err(|e| Failure::new(Status::Tool, e))?;
        let ll = dir.path().join("out.ll");
        std::fs::write(&ll, &text).map_err(|e| Failure::new(Status::Tool, e))?;
        tc.verify(&ll).map_err(tool_failure)?;
        if verbose {
            eprintln!("verified with {tc}");
        }
    }
    write_output(args.output.as_deref(), &text)
}

fn bind_failure(e: BindError) -> Failure {
    let status = if e.is_tool_failure() {
        Status::Tool
    } else {
        Status::Macro
    };
    Failure::new(status, e)
}

fn cmd_bindgen(args: &Bindgen) -> Outcome {
    let cc = Toolchain::locate(C_FRONTEND, args.cc.as_deref()).map_err(tool_failure)?;
    let request = BindRequest {
        headers: args.headers.clone(),
        functions: args.functions.clone(),
        structs: args.structs.clone(),
        typedefs: args.typedefs.clone(),
    };
    let binding = bindgen::bind(&cc, &request, &args.include).map_err(bind_failure)?;
    let forms = Value::Array(binding.forms());
    let out = if args.json {
        sexpr::render_json_forms(&forms)
    } else {
        let mut out: String = binding
            .aliases
            .iter()
            .map(|(name, ty)| format!("; {name} = {ty}\n"))
            .collect();
        out.push_str(&sexpr::render_forms(&forms_from_json(&forms)?));
        out
    };
    write_output(args.output.as_deref(), &out)
}

fn cmd_run(args: &Run, verbose: bool) -> Outcome<u8> {
    let text = compile_text(&args.input, args.json, args.entry.as_deref())?;
    let tc = Toolchain::locate(TOOLCHAIN, args.toolchain.as_deref()).map_err(tool_failure)?;
    let dir = tempfile::Builder::new()
        .prefix("clisp-run-")
        .tempdir()
        .map_err(|e| Failure::new(Status::Tool, e))?;
    let ll = dir.path().join("program.ll");
    std::fs::write(&ll, &text).map_err(|e| Failure::new(Status::Tool, e))?;
    if let Err(e) = tc.verify(&ll) {
        let kept = dir.keep();
        return Err(Failure {
            status: Status::Tool,
            lines: vec![
                e.to_string(),
                format!("IR kept at {}", kept.join("program.ll").display()),
            ],
        });
    }
    let exe = dir.path().join("program");
    let mut inputs = vec![ll];
    inputs.extend(args.link.iter().cloned());
    tc.link(&inputs, &exe).map_err(tool_failure)?;
    if verbose {
        eprintln!("linked {} with {tc}", exe.display());
    }
    let status = std::process::Command::new(&exe)
        .status()
        .map_err(|e| Failure::new(Status::Tool, format!("running {}: {e}", exe.display())))?;
    match status.code() {
        Some(code) => Ok(code as u8),
        None => Err(Failure::new(
            Status::Tool,
            format!("program terminated abnormally ({status})"),
        )),
    }
}

fn dispatch(cli: &Cli) -> Outcome<u8> {
    match &cli.command {
        Command::S2json(args) => {
            let forms = parse_source(&read_input(&args.input)?)?;
            write_output(
                args.output.as_deref(),
                &sexpr::render_json_forms(&sexpr::to_json_forms(&forms)),
            )?;
        }
        Command::Json2s(args) => {
            let forms = forms_from_json(&parse_json_value(&read_input(&args.input)?)?)?;
            write_output(args.output.as_deref(), &sexpr::render_forms(&forms))?;
        }
        Command::Expand(args) => cmd_expand(args, cli.verbose)?,
        Command::Compile(args) => cmd_compile(args, cli.verbose)?,
        Command::Bindgen(args) => cmd_bindgen(args)?,
        Command::Run(args) => return cmd_run(args, cli.verbose),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Status::Usage as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            for line in &failure.lines {
                eprintln!("error: {line}");
            }
            ExitCode::from(failure.status as u8)
        }
    }
}
