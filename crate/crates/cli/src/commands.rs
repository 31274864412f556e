use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use hierbvn::format::{parse_matrix, parse_schedule, write_matrix, write_schedule};
use hierbvn::matrix::sum_slots;
use hierbvn::sim::check_schedule;
use hierbvn::{balance_all_blocks, decompose as flat_decompose, hier_decompose, BlockMatrix, BlockShape};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_matrix(path: &Path) -> Result<BlockMatrix> {
    parse_matrix(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Writes `text` to `out`, or stdout. Returns whether stdout was used.
fn emit(out: Option<&Path>, text: &str) -> Result<bool> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            Ok(false)
        }
        None => {
            print!("{text}");
            Ok(true)
        }
    }
}

fn join(values: &[u64]) -> String {
    values.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

pub fn decompose(path: &Path, flat: bool, out: Option<&Path>) -> Result<ExitCode> {
    let x = read_matrix(path)?;
    let ports = x.shape().ports();
    let (slots, scale, method) = if flat {
        let delta = x.data().scale()?;
        (flat_decompose(x.data(), delta)?.parts, delta, "flat")
    } else {
        let schedule = hier_decompose(&x);
        let delta = schedule.len() as u64;
        (schedule.into_slots(), delta, "hierarchical")
    };
    let reconstructed = sum_slots(ports, &slots)?;
    let to_stdout = emit(out, &write_schedule(ports, &slots))?;
    let summary = format!(
        "{method} decomposition: {} slots (scale {scale}, port bound {})\nreconstructed {} of {} packets{}",
        slots.len(),
        x.completion_lower_bound(),
        reconstructed.total(),
        x.data().total(),
        if reconstructed == *x.data() { "" } else { " (MISMATCH)" },
    );
    if to_stdout {
        eprintln!("{summary}");
    } else {
        println!("{summary}");
    }
    Ok(ExitCode::SUCCESS)
}

pub fn balance(path: &Path, block: Option<usize>, skip_diagonal: bool, out: Option<&Path>) -> Result<ExitCode> {
    let x = read_matrix(path)?;
    let ports = x.shape().ports();
    let m = match block {
        Some(m) => m,
        None if x.shape().m() > 1 => x.shape().m(),
        None => ports,
    };
    if m == 0 || ports % m != 0 {
        bail!("block size {m} does not divide the {ports} ports");
    }
    let view = BlockMatrix::new(BlockShape::new(m, ports / m)?, x.data().clone())?;
    let (balanced, reports) = balance_all_blocks(&view, skip_diagonal);

    let mut log = String::new();
    for b in reports.iter().filter(|b| view.block_total(b.src, b.dst) > 0) {
        let before = view.block(b.src, b.dst);
        let after = balanced.block(b.src, b.dst);
        let r = &b.report;
        log.push_str(&format!(
            "block ({},{}): B={} phase1={} phase2={} rows [{}] -> [{}] cols [{}] -> [{}]\n",
            b.src,
            b.dst,
            r.target,
            r.phase1_transfers,
            r.phase2_transfers,
            join(&before.row_sums()),
            join(&after.row_sums()),
            join(&before.col_sums()),
            join(&after.col_sums()),
        ));
    }
    let total: u64 = reports.iter().map(|b| b.report.transfers()).sum();
    log.push_str(&format!("{total} unit transfers over {} blocks", reports.len()));

    let result = BlockMatrix::new(x.shape(), balanced.into_inner())?;
    if emit(out, &write_matrix(&result))? {
        eprintln!("{log}");
    } else {
        println!("{log}");
    }
    Ok(ExitCode::SUCCESS)
}

pub fn verify(matrix: &Path, schedule: &Path) -> Result<ExitCode> {
    let x = read_matrix(matrix)?;
    let file = parse_schedule(&read(schedule)?).with_context(|| format!("parsing {}", schedule.display()))?;
    let ports = x.shape().ports();
    let mut problems = Vec::new();

    if file.ports != ports {
        problems.push(format!("schedule has {} ports, matrix has {ports}", file.ports));
    }
    if file.declared_slots != file.slots.len() {
        problems.push(format!(
            "header declares {} slots, file lists {}",
            file.declared_slots,
            file.slots.len()
        ));
    }
    match file.to_subpermutations() {
        Err((d, err)) => problems.push(format!("slot {d}: not a subpermutation ({err})")),
        Ok(slots) if file.ports == ports => {
            let check = check_schedule(x.data(), &slots);
            if !check.residual.is_zero() {
                problems.push(format!("residual of {} packets:", check.residual.total()));
                for r in 0..ports {
                    for c in 0..ports {
                        let left = check.residual.get(r, c);
                        if left > 0 {
                            problems.push(format!("  {r}>{c}: {left}"));
                        }
                    }
                }
            }
            if check.idle_services > 0 {
                println!("note: {} connections found an empty queue", check.idle_services);
            }
        }
        Ok(_) => {}
    }

    if problems.is_empty() {
        println!("PASS: {} slots clear {} packets", file.slots.len(), x.data().total());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL");
        for p in problems {
            println!("{p}");
        }
        Ok(ExitCode::FAILURE)
    }
}
