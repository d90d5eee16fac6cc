//! Config file: one `key = value` per line, `#` starts a comment. A key is
//! any long flag name (`out-dir` or `out_dir`); `true`/`false` set or skip
//! a switch. Flags given on the command line win. Keys that belong to some
//! other subcommand are ignored, so one file can serve a whole workflow.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Command;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>, String> {
    let mut out: Vec<ConfigEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        if out.iter().any(|e| e.key == key) {
            return Err(format!("line {}: `{key}` set twice", i + 1));
        }
        out.push(ConfigEntry {
            key,
            value: v.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

fn long_flags(cmd: &Command) -> impl Iterator<Item = &clap::Arg> {
    cmd.get_arguments().filter(|a| a.get_long().is_some())
}

fn any_command_has(cmd: &Command, key: &str) -> bool {
    long_flags(cmd).any(|a| a.get_long() == Some(key))
        || cmd.get_subcommands().any(|s| any_command_has(s, key))
}

/// The long flags named on the command line, the `--config` value, and
/// the subcommand path, found by walking the command tree.
fn scan(root: &Command, argv: &[OsString]) -> (Vec<String>, Option<PathBuf>, Vec<String>) {
    let mut given = Vec::new();
    let mut config = None;
    let mut path = Vec::new();
    let mut cmd = root;
    let mut i = 1;
    while i < argv.len() {
        let tok = argv[i].to_string_lossy().into_owned();
        i += 1;
        if let Some(flag) = tok.strip_prefix("--") {
            let (name, inline) = match flag.split_once('=') {
                Some((n, v)) => (n.to_string(), Some(v.to_string())),
                None => (flag.to_string(), None),
            };
            let takes_value = long_flags(cmd)
                .chain(long_flags(root))
                .find(|a| a.get_long() == Some(&name))
                .is_some_and(|a| a.get_action().takes_values());
            let value = match inline {
                Some(v) => Some(v),
                None if takes_value && i < argv.len() => {
                    i += 1;
                    Some(argv[i - 1].to_string_lossy().into_owned())
                }
                None => None,
            };
            if name == "config" {
                config = value.map(PathBuf::from);
            }
            given.push(name);
        } else if let Some(sub) = cmd.find_subcommand(&tok) {
            path.push(sub.get_name().to_string());
            cmd = sub;
        }
    }
    (given, config, path)
}

/// Returns `argv` with the config file's flags appended.
pub fn apply_config(root: &Command, argv: Vec<OsString>) -> Result<Vec<OsString>, clap::Error> {
    let mut root = root.clone();
    root.build();
    let (given, config, path) = scan(&root, &argv);
    let Some(config) = config else {
        return Ok(argv);
    };
    let fail = |msg: String| Err(root.clone().error(ErrorKind::ValueValidation, msg));
    let text = match fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return fail(format!("config {}: {e}", config.display())),
    };
    let entries = match parse_config(&text) {
        Ok(e) => e,
        Err(e) => return fail(format!("config {}: {e}", config.display())),
    };
    let mut leaf = &root;
    for name in &path {
        leaf = leaf.find_subcommand(name).expect("path found by scan");
    }
    let mut argv = argv;
    for e in entries {
        if e.key == "config" || !any_command_has(&root, &e.key) {
            return fail(format!(
                "config {} line {}: unknown key `{}`",
                config.display(),
                e.line,
                e.key
            ));
        }
        let arg = long_flags(leaf)
            .chain(long_flags(&root))
            .find(|a| a.get_long() == Some(e.key.as_str()));
        let Some(arg) = arg else { continue };
        if given.contains(&e.key) {
            continue;
        }
        if arg.get_action().takes_values() {
            argv.push(format!("--{}", e.key).into());
            argv.push(e.value.into());
        } else {
            match e.value.as_str() {
                "true" => argv.push(format!("--{}", e.key).into()),
                "false" => {}
                v => {
                    return fail(format!(
                        "config {} line {}: `{}` takes true or false, got `{v}`",
                        config.display(),
                        e.line,
                        e.key
                    ))
                }
            }
        }
    }
    Ok(argv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::{Arg, ArgAction};

    fn cmd() -> Command {
        Command::new("t")
            .arg(Arg::new("seed").long("seed").global(true))
            .arg(Arg::new("config").long("config").global(true))
            .subcommand(
                Command::new("train")
                    .arg(Arg::new("bags").long("bags"))
                    .arg(Arg::new("fast").long("fast").action(ArgAction::SetTrue)),
            )
            .subcommand(Command::new("label").arg(Arg::new("budget").long("budget")))
    }

    fn run(args: &[&str], config: &str) -> Result<Vec<String>, clap::Error> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        fs::write(&path, config).unwrap();
        let mut argv: Vec<OsString> = args.iter().map(OsString::from).collect();
        argv.push("--config".into());
        argv.push(path.clone().into());
        let out = apply_config(&cmd(), argv)?;
        Ok(out[args.len() + 2..]
            .iter()
            .map(|s| s.to_string_lossy().into_owned())
            .collect())
    }

    #[test]
    fn fills_missing_flags_only() {
        let extra = run(
            &["t", "train", "--seed", "3"],
            "seed = 9\nbags=4 # four\nfast = true\nbudget = 10\n",
        )
        .unwrap();
        assert_eq!(extra, vec!["--bags", "4", "--fast"]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = run(&["t", "train"], "bogus = 1\n").unwrap_err();
        assert_eq!(err.kind(), ErrorKind::ValueValidation);
    }

    #[test]
    fn underscores_and_comments() {
        let parsed = parse_config("# top\n out_dir = x \n\n").unwrap();
        assert_eq!(
            parsed,
            vec![ConfigEntry {
                key: "out-dir".into(),
                value: "x".into(),
                line: 2
            }]
        );
        assert!(parse_config("a = 1\na = 2\n").is_err());
        assert!(parse_config("novalue\n").is_err());
    }
}
