//! Temporal query parameters: time relation, attribute projection, a
//! single value filter, and the page offset.

use chrono::{DateTime, Utc};
use citylab_resource::PayloadValue;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeRel {
    Before,
    After,
    During,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Gt,
    Lt,
    Ge,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Gt => ord == Greater,
            CmpOp::Lt => ord == Less,
            CmpOp::Ge => ord != Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFilter {
    pub attr: String,
    pub op: CmpOp,
    pub literal: Literal,
}

impl ValueFilter {
    /// `pm2p5>30.00`, `airQualityLevel=="POOR"`.
    pub fn parse(q: &str) -> ApiResult<Self> {
        let bad = || ApiError::BadQuery(format!("cannot parse filter {q:?}"));
        let at = q.find(['<', '>', '=', '!']).ok_or_else(bad)?;
        let rest = &q[at..];
        let (op, len) = [
            (">=", CmpOp::Ge),
            ("<=", CmpOp::Le),
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            (">", CmpOp::Gt),
            ("<", CmpOp::Lt),
        ]
        .into_iter()
        .find(|(s, _)| rest.starts_with(s))
        .map(|(s, op)| (op, s.len()))
        .ok_or_else(bad)?;
        let attr = q[..at].trim();
        let lit = rest[len..].trim();
        if attr.is_empty() || lit.is_empty() {
            return Err(bad());
        }
        let literal = match lit.parse::<f64>() {
            Ok(v) if v.is_finite() => Literal::Number(v),
            _ => {
                if !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    return Err(ApiError::BadQuery(format!("{} needs a numeric literal", op.symbol())));
                }
                Literal::Text(lit.trim_matches(|c| c == '"' || c == '\'').to_owned())
            }
        };
        Ok(Self {
            attr: attr.to_owned(),
            op,
            literal,
        })
    }

    /// A missing reading satisfies no predicate.
    pub fn matches(&self, v: &PayloadValue) -> bool {
        match (v, &self.literal) {
            (PayloadValue::Number(x), Literal::Number(y)) => x.partial_cmp(y).is_some_and(|o| self.op.holds(o)),
            (PayloadValue::Text(x), Literal::Text(y)) => self.op.holds(x.as_str().cmp(y.as_str())),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalQuery {
    pub timerel: TimeRel,
    pub time: DateTime<Utc>,
    /// Required for `during`.
    pub end_time: Option<DateTime<Utc>>,
    pub attrs: Option<Vec<String>>,
    pub filter: Option<ValueFilter>,
    pub offset: usize,
}

fn parse_time(name: &str, s: &str) -> ApiResult<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| ApiError::BadQuery(format!("{name}: {e}")))
}

impl TemporalQuery {
    pub fn during(start: DateTime<Utc>, end: DateTime<Utc>) -> Self {
        Self {
            timerel: TimeRel::During,
            time: start,
            end_time: Some(end),
            attrs: None,
            filter: None,
            offset: 0,
        }
    }

    /// Reads `timerel`, `time`, `endTime`, `attrs`, `q` and `offset`.
    pub fn from_params(params: &[(String, String)]) -> ApiResult<Self> {
        let get = |k: &str| params.iter().find(|(n, _)| n == k).map(|(_, v)| v.as_str());
        let timerel = match get("timerel") {
            Some("before") => TimeRel::Before,
            Some("after") => TimeRel::After,
            Some("during") => TimeRel::During,
            Some(other) => return Err(ApiError::BadQuery(format!("timerel {other:?}"))),
            None => return Err(ApiError::BadQuery("timerel missing".into())),
        };
        let time = parse_time("time", get("time").ok_or_else(|| ApiError::BadQuery("time missing".into()))?)?;
        let end_time = get("endTime").map(|s| parse_time("endTime", s)).transpose()?;
        if timerel == TimeRel::During && end_time.is_none() {
            return Err(ApiError::BadQuery("during needs endTime".into()));
        }
        let attrs = get("attrs").map(|a| {
            a.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect::<Vec<_>>()
        });
        let filter = get("q").map(ValueFilter::parse).transpose()?;
        let offset = match get("offset") {
            Some(o) => o
                .parse()
                .map_err(|_| ApiError::BadQuery(format!("offset {o:?}")))?,
            None => 0,
        };
        Ok(Self {
            timerel,
            time,
            end_time,
            attrs,
            filter,
            offset,
        })
    }

    /// Half-open epoch-second window. Open-sided relations are bounded by
    /// the span limit on their open side.
    pub fn window(&self, max_span_days: i64) -> ApiResult<(i64, i64)> {
        let max = max_span_days * 86_400;
        let t = self.time.timestamp();
        match self.timerel {
            TimeRel::Before => Ok((t - max, t)),
            TimeRel::After => Ok((t, t + max)),
            TimeRel::During => {
                let end = self.end_time.expect("checked on parse").timestamp();
                if end < t {
                    return Err(ApiError::BadQuery("endTime before time".into()));
                }
                // sub-second parts are irrelevant for the span limit
                let span = (self.end_time.unwrap() - self.time).num_milliseconds() as f64 / 86_400_000.0;
                if end - t > max {
                    return Err(ApiError::SpanTooLarge { days: span, max: max_span_days });
                }
                Ok((t, end))
            }
        }
    }
}
