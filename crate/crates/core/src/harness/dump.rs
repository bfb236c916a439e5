//! Plain-text parameter dump of a model and its training counts.
//!
//! ```text
//! # npe-model v1
//! t 1
//! init_std 0.001
//! input_dim 32
//! counts 500,300,...
//! linear backbone <out> <in>
//! <out lines of <in> weights>
//! <one line of <out> biases>
//! linear head <out> <in>
//! ...
//! linear pem <out> <in>
//! ...
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{Backbone, Linear, NpeModel, PemBank, Sign};
use crate::numerics::Matrix;

const MAGIC: &str = "# npe-model v1";

#[derive(Clone, Debug, PartialEq)]
pub struct ModelDump {
    pub model: NpeModel,
    pub counts: Vec<usize>,
}

fn write_linear(out: &mut String, role: &str, l: &Linear) {
    let _ = writeln!(out, "linear {role} {} {}", l.output_dim(), l.input_dim());
    for i in 0..l.weight.rows() {
        let row: Vec<String> = l.weight.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    let bias: Vec<String> = l.bias.as_slice().iter().map(|v| format!("{v:.16e}")).collect();
    let _ = writeln!(out, "{}", bias.join(" "));
}

pub fn format_model(model: &NpeModel, counts: &[usize]) -> String {
    let mut out = format!("{MAGIC}\n");
    let _ = writeln!(out, "t {}", model.pems.sign().t());
    let _ = writeln!(out, "init_std {}", model.pems.init_std());
    let _ = writeln!(out, "input_dim {}", model.input_dim());
    let counts: Vec<String> = counts.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "counts {}", counts.join(","));
    for l in model.backbone.layers() {
        write_linear(&mut out, "backbone", l);
    }
    write_linear(&mut out, "head", &model.head);
    for l in model.pems.maps() {
        write_linear(&mut out, "pem", l);
    }
    out
}

pub fn save_model(model: &NpeModel, counts: &[usize], path: &Path) -> Result<()> {
    std::fs::write(path, format_model(model, counts))?;
    Ok(())
}

struct Lines<'a> {
    path: PathBuf,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Option<&'a str> {
        let (i, l) = self.iter.next()?;
        self.line = i + 1;
        Some(l)
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        self.next().ok_or_else(|| Error::Format {
            path: self.path.clone(),
            line: self.line + 1,
            msg: format!("expected {what}, found end of file"),
        })
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let l = self.expect(key)?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected '{key} <value>'")))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let l = self.expect("a row of numbers")?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err("bad number"))?;
        if v.len() != n {
            return Err(self.err(format!("expected {n} numbers, found {}", v.len())));
        }
        Ok(v)
    }
}

pub fn parse_model(text: &str, path: impl Into<PathBuf>) -> Result<ModelDump> {
    let mut lines = Lines {
        path: path.into(),
        iter: text.lines().enumerate(),
        line: 0,
    };
    if lines.expect("header")? != MAGIC {
        return Err(lines.err(format!("expected '{MAGIC}'")));
    }
    let t: u8 = lines.keyed("t")?.parse().map_err(|_| lines.err("bad t"))?;
    let sign = Sign::from_t(t).map_err(|_| lines.err("t must be 0 or 1"))?;
    let init_std: f64 = lines.keyed("init_std")?.parse().map_err(|_| lines.err("bad init_std"))?;
    let input_dim: usize = lines.keyed("input_dim")?.parse().map_err(|_| lines.err("bad input_dim"))?;
    let counts_text = lines.keyed("counts")?;
    let counts: Vec<usize> = counts_text
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| lines.err("bad counts"))?;

    let (mut backbone, mut head, mut pems) = (Vec::new(), None, Vec::new());
    while let Some(l) = lines.next() {
        if l.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = l.split_whitespace().collect();
        let [tag, role, out, inp] = parts[..] else {
            return Err(lines.err("expected 'linear <role> <out> <in>'"));
        };
        if tag != "linear" {
            return Err(lines.err("expected 'linear <role> <out> <in>'"));
        }
        let out: usize = out.parse().map_err(|_| lines.err("bad size"))?;
        let inp: usize = inp.parse().map_err(|_| lines.err("bad size"))?;
        let mut w = Vec::with_capacity(out * inp);
        for _ in 0..out {
            w.extend(lines.floats(inp)?);
        }
        let b = lines.floats(out)?;
        let layer = Linear::from_parts(Matrix::from_vec(out, inp, w)?, Matrix::from_vec(out, 1, b)?)?;
        match role {
            "backbone" if head.is_none() => backbone.push(layer),
            "head" if head.is_none() => head = Some(layer),
            "pem" if head.is_some() => pems.push(layer),
            _ => return Err(lines.err(format!("unexpected '{role}' layer here"))),
        }
    }
    let head = head.ok_or_else(|| lines.err("missing head layer"))?;
    let backbone = Backbone::from_layers(backbone, input_dim)?;
    let mut bank = PemBank::from_maps(pems, sign)?;
    bank.set_init_std(init_std);
    let model = NpeModel::from_parts(backbone, head, bank)?;
    if !counts.is_empty() && counts.len() != model.num_classes() {
        return Err(Error::Format {
            path: lines.path.clone(),
            line: 5,
            msg: format!("{} counts for {} classes", counts.len(), model.num_classes()),
        });
    }
    Ok(ModelDump { model, counts })
}

pub fn load_model(path: &Path) -> Result<ModelDump> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text, path)
}
