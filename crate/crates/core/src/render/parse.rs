//! Text form of [`SdfScene`](super::SdfScene).
//!
//! ```text
//! expr   := call
//! call   := ident "(" [arg ("," arg)*] ")"
//! arg    := number | string | call
//! ```
//!
//! | call                               | meaning                                |
//! |------------------------------------|----------------------------------------|
//! | `sphere(r)`                        | sphere of radius `r` at the origin     |
//! | `box(h)` / `box(hx, hy, hz)`       | axis-aligned box with half extents     |
//! | `ni("path")` / `ni("path", k)`     | neural implicit, step relaxation `k`   |
//! | `grid("path")`                     | SDFG grid file                         |
//! | `empty()`                          | the empty set                          |
//! | `translate(x, y, z, e)`            | move `e` by `(x, y, z)`                |
//! | `rotate(ax, ay, az, degrees, e)`   | rotate `e` about an axis               |
//! | `union(e, ...)`                    | minimum over two or more operands      |
//! | `intersection(e, ...)`             | maximum over two or more operands      |
//! | `difference(a, b)`                 | `max(a, -b)`                           |

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::SdfScene;
use crate::distance_field::SdfGrid;
use crate::format::NeuralImplicit;
use crate::geom::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("cannot load {path}: {message}")]
    Load { path: String, message: String },
}

/// Parsed but not yet loaded scene expression.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneExpr {
    Number(f64),
    Text(String),
    Call {
        name: String,
        args: Vec<SceneExpr>,
        offset: usize,
    },
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error<T>(&self, offset: usize, message: impl Into<String>) -> Result<T, SceneError> {
        Err(SceneError::Parse {
            offset,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, want: char) -> Result<(), SceneError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.error(self.pos, format!("expected '{want}', found '{c}'")),
            None => self.error(self.pos, format!("expected '{want}', found end of input")),
        }
    }

    fn arg(&mut self) -> Result<SceneExpr, SceneError> {
        match self.peek() {
            None => self.error(self.pos, "expected an argument, found end of input"),
            Some('"') => {
                let start = self.pos;
                self.pos += 1;
                match self.src[self.pos..].find('"') {
                    Some(end) => {
                        let text = self.src[self.pos..self.pos + end].to_string();
                        self.pos += end + 1;
                        Ok(SceneExpr::Text(text))
                    }
                    None => self.error(start, "unterminated string"),
                }
            }
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = self.pos;
                let len = self.src[start..]
                    .find(|c: char| !(c.is_ascii_alphanumeric() || matches!(c, '-' | '+' | '.')))
                    .unwrap_or(self.src.len() - start);
                let token = &self.src[start..start + len];
                match token.parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        self.pos += len;
                        Ok(SceneExpr::Number(v))
                    }
                    _ => self.error(start, format!("invalid number '{token}'")),
                }
            }
            Some(_) => self.call(),
        }
    }

    fn call(&mut self) -> Result<SceneExpr, SceneError> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.src.len() - start);
        if len == 0 {
            return match self.peek() {
                Some(c) => self.error(start, format!("expected a name, found '{c}'")),
                None => self.error(start, "expected a name, found end of input"),
            };
        }
        let name = self.src[start..start + len].to_string();
        self.pos += len;
        self.expect('(')?;
        let mut args = Vec::new();
        if self.peek() == Some(')') {
            self.pos += 1;
        } else {
            loop {
                args.push(self.arg()?);
                match self.peek() {
                    Some(',') => self.pos += 1,
                    Some(')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => return self.error(self.pos, format!("expected ',' or ')', found '{c}'")),
                    None => return self.error(self.pos, "expected ',' or ')', found end of input"),
                }
            }
        }
        Ok(SceneExpr::Call {
            name,
            args,
            offset: start,
        })
    }
}

/// Parses the syntax only; no files are touched.
pub fn parse_scene_expr(text: &str) -> Result<SceneExpr, SceneError> {
    let mut p = Parser { src: text, pos: 0 };
    let expr = p.call()?;
    if let Some(c) = p.peek() {
        return p.error(p.pos, format!("unexpected trailing '{c}'"));
    }
    Ok(expr)
}

/// Parses and loads a scene; relative file paths resolve against `base`.
pub fn parse_scene(text: &str, base: &Path) -> Result<SdfScene, SceneError> {
    parse_scene_expr(text)?.build(base)
}

impl SceneExpr {
    pub fn build(&self, base: &Path) -> Result<SdfScene, SceneError> {
        let (name, args, offset) = match self {
            SceneExpr::Call { name, args, offset } => (name.as_str(), args, *offset),
            _ => unreachable!("the parser only produces calls at the top"),
        };
        let fail = |message: String| Err(SceneError::Parse { offset, message });
        let numbers = |count: usize| -> Result<Vec<f64>, SceneError> {
            args.iter()
                .take(count)
                .map(|a| match a {
                    SceneExpr::Number(v) => Ok(*v),
                    _ => Err(SceneError::Parse {
                        offset,
                        message: format!("{name}: expected a number argument"),
                    }),
                })
                .collect()
        };
        let child = |i: usize| -> Result<SdfScene, SceneError> {
            match args.get(i) {
                Some(e @ SceneExpr::Call { .. }) => e.build(base),
                _ => Err(SceneError::Parse {
                    offset,
                    message: format!("{name}: argument {} must be a scene", i + 1),
                }),
            }
        };
        let path_arg = || -> Result<String, SceneError> {
            match args.first() {
                Some(SceneExpr::Text(p)) => Ok(base.join(p).display().to_string()),
                _ => Err(SceneError::Parse {
                    offset,
                    message: format!("{name}: first argument must be a quoted path"),
                }),
            }
        };
        let load_err = |path: &str, e: &dyn std::fmt::Display| SceneError::Load {
            path: path.to_string(),
            message: e.to_string(),
        };
        match (name, args.len()) {
            ("sphere", 1) => Ok(SdfScene::sphere(numbers(1)?[0])),
            ("box", 1) => Ok(SdfScene::cuboid(Vec3::repeat(numbers(1)?[0]))),
            ("box", 3) => {
                let v = numbers(3)?;
                Ok(SdfScene::cuboid(Vec3::new(v[0], v[1], v[2])))
            }
            ("empty", 0) => Ok(SdfScene::Empty),
            ("ni", 1 | 2) => {
                let path = path_arg()?;
                let relaxation = match args.get(1) {
                    Some(SceneExpr::Number(k)) if *k > 0.0 => *k,
                    Some(_) => return fail("ni: relaxation must be a positive number".into()),
                    None => 1.0,
                };
                let ni = NeuralImplicit::load(&path).map_err(|e| load_err(&path, &e))?;
                Ok(SdfScene::Neural {
                    field: Arc::new(ni.field()),
                    relaxation,
                })
            }
            ("grid", 1) => {
                let path = path_arg()?;
                let grid = SdfGrid::load(&path).map_err(|e| load_err(&path, &e))?;
                Ok(SdfScene::Grid(Arc::new(grid)))
            }
            ("translate", 4) => {
                let v = numbers(3)?;
                Ok(child(3)?.translate(Vec3::new(v[0], v[1], v[2])))
            }
            ("rotate", 5) => {
                let v = numbers(4)?;
                match child(4)?.rotate(Vec3::new(v[0], v[1], v[2]), v[3]) {
                    Some(s) => Ok(s),
                    None => fail("rotate: axis must be nonzero".into()),
                }
            }
            ("union" | "intersection", n) if n >= 2 => {
                let mut acc = child(0)?;
                for i in 1..n {
                    let next = child(i)?;
                    acc = if name == "union" {
                        SdfScene::union(acc, next)
                    } else {
                        SdfScene::intersection(acc, next)
                    };
                }
                Ok(acc)
            }
            ("difference", 2) => Ok(SdfScene::difference(child(0)?, child(1)?)),
            ("sphere" | "box" | "empty" | "ni" | "grid" | "translate" | "rotate" | "union" | "intersection" | "difference", n) => {
                fail(format!("{name}: wrong number of arguments ({n})"))
            }
            _ => fail(format!("unknown scene function '{name}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SdfScene, SceneError> {
        parse_scene(text, Path::new("."))
    }

    #[test]
    fn unfinished_call_reports_end_offset() {
        assert!(matches!(parse("union("), Err(SceneError::Parse { offset: 6, .. })));
    }

    #[test]
    fn nested_expression() {
        let s = parse("union(sphere(0.5), translate(0.3, 0, 0, sphere(0.2)))").unwrap();
        assert!((s.evaluate(&Vec3::new(0.3, 0.0, 0.0)) + 0.2).abs() < 1e-12);
        assert!((s.evaluate(&Vec3::new(0.0, 0.0, 0.0)) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(parse("sphere(0.5) x"), Err(SceneError::Parse { offset: 12, .. })));
        assert!(matches!(parse("cone(1)"), Err(SceneError::Parse { offset: 0, .. })));
        assert!(matches!(parse("union(sphere(1), foo)"), Err(SceneError::Parse { offset: 20, .. })));
        assert!(matches!(parse("sphere(1, 2)"), Err(SceneError::Parse { .. })));
        assert!(matches!(parse("sphere(abc"), Err(SceneError::Parse { .. })));
        assert!(matches!(parse("ni(\"nope.ni\")"), Err(SceneError::Load { .. })));
    }

    #[test]
    fn nary_union_and_empty() {
        let s = parse("union(sphere(0.1), sphere(0.2), box(0.05))").unwrap();
        assert!((s.evaluate(&Vec3::zeros()) + 0.2).abs() < 1e-12);
        let d = parse("difference(sphere(0.4), empty())").unwrap();
        assert!((d.evaluate(&Vec3::new(0.1, 0.0, 0.0)) + 0.3).abs() < 1e-12);
    }
}
