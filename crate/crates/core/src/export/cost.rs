use serde::Serialize;

use crate::conversation::UsageLedger;
use crate::gateway::Registry;
use crate::money::Money;

use super::ExportError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostRow {
    pub model_id: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub input_cost: Money,
    pub output_cost: Money,
    pub estimated: bool,
}

impl CostRow {
    pub fn total(&self) -> Money {
        self.input_cost + self.output_cost
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
    pub total_cost: Money,
    pub any_estimated: bool,
}

pub fn compute_cost(ledger: &UsageLedger, registry: &Registry) -> Result<CostReport, ExportError> {
    let mut report = CostReport::default();
    for (model_id, usage) in ledger.iter() {
        let spec = registry
            .get(model_id)
            .ok_or_else(|| ExportError::UnknownModel(model_id.to_string()))?;
        let row = CostRow {
            model_id: model_id.to_string(),
            input_tokens: usage.input_tokens,
            output_tokens: usage.output_tokens,
            input_cost: Money::cost_of(usage.input_tokens, spec.input_price),
            output_cost: Money::cost_of(usage.output_tokens, spec.output_price),
            estimated: usage.any_estimated,
        };
        report.total_cost += row.total();
        report.any_estimated |= row.estimated;
        report.rows.push(row);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetStatus {
    Ok,
    Warn,
    Exceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetReport {
    pub status: BudgetStatus,
    pub total_cost: Money,
    pub limit: Money,
}

/// Status of `total` against `limit`; warning starts at `warn_ratio` of the limit.
pub fn budget_status(total: Money, limit: Money, warn_ratio: f64) -> BudgetStatus {
    if total > limit {
        return BudgetStatus::Exceeded;
    }
    let ppm = (warn_ratio.clamp(0.0, 1.0) * 1e6).round() as i128;
    if total.raw() * 1_000_000 >= limit.raw() * ppm {
        BudgetStatus::Warn
    } else {
        BudgetStatus::Ok
    }
}

/// Sums the cost of every ledger in the month and grades it against the limit.
pub fn check_budget<'a>(
    month_ledgers: impl IntoIterator<Item = &'a UsageLedger>,
    registry: &Registry,
    monthly_limit: Money,
    warn_ratio: f64,
) -> Result<BudgetReport, ExportError> {
    if monthly_limit <= Money::ZERO {
        return Err(ExportError::Validation(
            "monthly budget must be positive".into(),
        ));
    }
    let mut total = Money::ZERO;
    for ledger in month_ledgers {
        total += compute_cost(ledger, registry)?.total_cost;
    }
    Ok(BudgetReport {
        status: budget_status(total, monthly_limit, warn_ratio),
        total_cost: total,
        limit: monthly_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    #[test]
    fn budget_thresholds() {
        let limit = m("250");
        assert_eq!(budget_status(Money::ZERO, limit, 0.8), BudgetStatus::Ok);
        assert_eq!(budget_status(m("199.999999"), limit, 0.8), BudgetStatus::Ok);
        assert_eq!(budget_status(m("200"), limit, 0.8), BudgetStatus::Warn);
        assert_eq!(budget_status(m("250"), limit, 0.8), BudgetStatus::Warn);
        assert_eq!(
            budget_status(m("250.01"), limit, 0.8),
            BudgetStatus::Exceeded
        );
    }
}
