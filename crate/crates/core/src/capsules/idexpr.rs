use std::fmt;

/// Upper bound on the number of ids a single expression may expand to.
pub const MAX_EXPANSION: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdItem {
    Capsule(u32),
    Message(u32, u32),
}

impl fmt::Display for IdItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdItem::Capsule(c) => write!(f, "{c}"),
            IdItem::Message(c, m) => write!(f, "{c}-{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdSet {
    All,
    Items(Vec<IdItem>),
}

/// Target of `update` / `delete`: a capsule or one of its messages.
pub fn parse_target(s: &str) -> Option<IdItem> {
    let s = s.trim();
    match s.split_once('-') {
        Some((c, m)) => Some(IdItem::Message(pos(c)?, pos(m)?)),
        None => Some(IdItem::Capsule(pos(s)?)),
    }
}

fn pos(s: &str) -> Option<u32> {
    let s = s.trim().trim_start_matches('#');
    let v: u32 = s.parse().ok()?;
    (v > 0).then_some(v)
}

/// Parses `all`, or a comma list of `N`, `A:B`, `C-M`, and `C-M1:C-M2`.
pub fn parse_id_set(expr: &str) -> Result<IdSet, String> {
    let expr = expr.trim();
    if expr.eq_ignore_ascii_case("all") {
        return Ok(IdSet::All);
    }
    let bad = |why: &str| format!("malformed id expression `{expr}`: {why}");
    if expr.is_empty() {
        return Err(bad("empty"));
    }
    let mut items = Vec::new();
    for part in expr.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(bad("empty element"));
        }
        match part.split_once(':') {
            None => items.push(parse_target(part).ok_or_else(|| bad(part))?),
            Some((a, b)) => match (parse_target(a), parse_target(b)) {
                (Some(IdItem::Capsule(a)), Some(IdItem::Capsule(b))) if a <= b => {
                    if (b - a) as usize >= MAX_EXPANSION {
                        return Err(bad("range too large"));
                    }
                    items.extend((a..=b).map(IdItem::Capsule));
                }
                (Some(IdItem::Message(c1, a)), Some(IdItem::Message(c2, b))) if c1 == c2 && a <= b => {
                    if (b - a) as usize >= MAX_EXPANSION {
                        return Err(bad("range too large"));
                    }
                    items.extend((a..=b).map(|m| IdItem::Message(c1, m)));
                }
                _ => return Err(bad(part)),
            },
        }
        if items.len() > MAX_EXPANSION {
            return Err(bad("too many ids"));
        }
    }
    Ok(IdSet::Items(items))
}
