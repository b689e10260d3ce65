//! Replays a golden worker transcript.
//!
//! Script lines: `> LINE` reads one input line and requires it to equal
//! `LINE` (`> *` accepts any line), `< LINE` writes `LINE`, `! sleep MS`
//! pauses. Blank lines and `#` comments are ignored. After the script the
//! stub drains its input until end of file.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

fn main() -> ExitCode {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: archon-stub-worker SCRIPT");
        return ExitCode::from(2);
    };
    let script = match std::fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("archon-stub-worker: {path}: {e}");
            return ExitCode::from(2);
        }
    };
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut stdout = io::stdout().lock();
    for (number, line) in script.lines().enumerate() {
        let number = number + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(expected) = line.strip_prefix("> ") {
            let mut got = String::new();
            if input.read_line(&mut got).unwrap_or(0) == 0 {
                eprintln!("archon-stub-worker: line {number}: input ended");
                return ExitCode::from(3);
            }
            let got = got.strip_suffix('\n').unwrap_or(&got);
            if expected != "*" && got != expected {
                eprintln!("archon-stub-worker: line {number}: expected {expected:?}, got {got:?}");
                return ExitCode::from(3);
            }
        } else if let Some(output) = line.strip_prefix("< ") {
            if writeln!(stdout, "{output}").and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(3);
            }
        } else if let Some(ms) = line.strip_prefix("! sleep ") {
            match ms.trim().parse() {
                Ok(ms) => thread::sleep(Duration::from_millis(ms)),
                Err(_) => {
                    eprintln!("archon-stub-worker: line {number}: bad sleep {ms:?}");
                    return ExitCode::from(2);
                }
            }
        } else {
            eprintln!("archon-stub-worker: line {number}: unrecognised {line:?}");
            return ExitCode::from(2);
        }
    }
    let mut rest = String::new();
    while input.read_line(&mut rest).unwrap_or(0) > 0 {
        rest.clear();
    }
    ExitCode::SUCCESS
}
