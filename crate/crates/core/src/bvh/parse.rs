use std::path::Path;

use super::{Channel, JointSpec, Motion, Skeleton};
use crate::{Error, Result};

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, line)| line.split_whitespace().map(move |t| (i + 1, t)))
            .collect();
        Tokens { items, pos: 0 }
    }

    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or(self.items.last())
            .map_or(0, |t| t.0)
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.1)
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        let line = self.line();
        let tok = self.items.get(self.pos).map(|t| t.1).ok_or(Error::Syntax {
            line,
            message: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let line = self.line();
        let tok = self.next(keyword)?;
        if tok.eq_ignore_ascii_case(keyword) {
            Ok(())
        } else {
            Err(Error::Syntax {
                line,
                message: format!("expected `{keyword}`, found `{tok}`"),
            })
        }
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let line = self.line();
        let tok = self.next(what)?;
        tok.parse().map_err(|_| Error::Syntax {
            line,
            message: format!("expected {what}, found `{tok}`"),
        })
    }

    fn vec3(&mut self) -> Result<[f64; 3]> {
        Ok([
            self.number("offset value")?,
            self.number("offset value")?,
            self.number("offset value")?,
        ])
    }
}

/// Parses a complete BVH document.
pub fn parse_bvh(text: &str) -> Result<(Skeleton, Motion)> {
    let mut tokens = Tokens::new(text);
    match tokens.peek() {
        Some(t) if t.eq_ignore_ascii_case("HIERARCHY") => tokens.pos += 1,
        _ => return Err(Error::MissingSection("HIERARCHY")),
    }
    let mut specs = Vec::new();
    let line = tokens.line();
    match tokens.next("ROOT")? {
        t if t.eq_ignore_ascii_case("ROOT") => {}
        t => {
            return Err(Error::Syntax {
                line,
                message: format!("expected `ROOT`, found `{t}`"),
            })
        }
    }
    parse_joint(&mut tokens, None, &mut specs)?;
    let skeleton = Skeleton::new(specs)?;

    match tokens.peek() {
        Some(t) if t.eq_ignore_ascii_case("MOTION") => tokens.pos += 1,
        Some(t) if t.eq_ignore_ascii_case("ROOT") => {
            return Err(Error::InvalidHierarchy("more than one ROOT".into()))
        }
        Some(t) => {
            return Err(Error::Syntax {
                line: tokens.line(),
                message: format!("expected `MOTION`, found `{t}`"),
            })
        }
        None => return Err(Error::MissingSection("MOTION")),
    }
    tokens.expect("Frames:")?;
    let declared: usize = tokens.number("frame count")?;
    tokens.expect("Frame")?;
    tokens.expect("Time:")?;
    let frame_time: f64 = tokens.number("frame time")?;

    let channels = skeleton.channel_count();
    let rest = &tokens.items[tokens.pos..];
    let mut data = Vec::with_capacity(declared * channels);
    let mut found = 0;
    let mut i = 0;
    while i < rest.len() {
        let line = rest[i].0;
        let start = i;
        while i < rest.len() && rest[i].0 == line {
            i += 1;
        }
        let values = &rest[start..i];
        if values.len() != channels {
            return Err(Error::ChannelMismatch {
                line,
                expected: channels,
                found: values.len(),
            });
        }
        for &(line, tok) in values {
            let v: f64 = tok.parse().map_err(|_| Error::Syntax {
                line,
                message: format!("expected channel value, found `{tok}`"),
            })?;
            data.push(v);
        }
        found += 1;
    }
    if found != declared {
        return Err(Error::FrameCount { declared, found });
    }
    if found == 0 {
        return Err(Error::MissingSection("motion frames"));
    }
    let motion = Motion::new(frame_time, channels, data)?;
    Ok((skeleton, motion))
}

fn parse_joint(
    tokens: &mut Tokens<'_>,
    parent: Option<usize>,
    specs: &mut Vec<JointSpec>,
) -> Result<()> {
    let name = tokens.next("joint name")?.to_string();
    tokens.expect("{")?;
    tokens.expect("OFFSET")?;
    let offset = tokens.vec3()?;
    tokens.expect("CHANNELS")?;
    let count: usize = tokens.number("channel count")?;
    let mut channels = Vec::with_capacity(count);
    for _ in 0..count {
        let line = tokens.line();
        let tok = tokens.next("channel name")?;
        let channel: Channel = tok.parse().map_err(|_| Error::Syntax {
            line,
            message: format!("unknown channel `{tok}`"),
        })?;
        channels.push(channel);
    }
    let index = specs.len();
    specs.push(JointSpec {
        name,
        parent,
        offset,
        channels,
        end_site: None,
    });
    loop {
        let line = tokens.line();
        match tokens.next("`}`")? {
            "}" => return Ok(()),
            t if t.eq_ignore_ascii_case("JOINT") => parse_joint(tokens, Some(index), specs)?,
            t if t.eq_ignore_ascii_case("End") => {
                tokens.expect("Site")?;
                tokens.expect("{")?;
                tokens.expect("OFFSET")?;
                let site = tokens.vec3()?;
                tokens.expect("}")?;
                if specs[index].end_site.replace(site).is_some() {
                    return Err(Error::Syntax {
                        line,
                        message: "joint has two End Site blocks".into(),
                    });
                }
            }
            t => {
                return Err(Error::Syntax {
                    line,
                    message: format!("unexpected `{t}` in joint block"),
                })
            }
        }
    }
}

pub fn read_bvh(path: impl AsRef<Path>) -> Result<(Skeleton, Motion)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bvh(&text)
}
