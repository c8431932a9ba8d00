use crate::gateway::{estimate_tokens, Message};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overflow {
    /// Estimated tokens of the system prompt plus the new user message.
    pub needed: u64,
    pub budget: u64,
}

/// Fits `[system] ++ history ++ [new_user]` into `budget` estimated tokens by
/// dropping the oldest (user, assistant) pairs. The system prompt and the new
/// user message are never dropped; if they alone exceed the budget the
/// conversation cannot continue.
pub fn truncate_for_context(
    system: &Message,
    history: &[Message],
    new_user: &Message,
    budget: u64,
) -> Result<Vec<Message>, Overflow> {
    let base = estimate_tokens(&system.content) + estimate_tokens(&new_user.content);
    if base > budget {
        return Err(Overflow {
            needed: base,
            budget,
        });
    }
    let mut total: u64 = base
        + history
            .iter()
            .map(|m| estimate_tokens(&m.content))
            .sum::<u64>();
    let mut start = 0;
    while total > budget && start < history.len() {
        let pair_end = (start + 2).min(history.len());
        total -= history[start..pair_end]
            .iter()
            .map(|m| estimate_tokens(&m.content))
            .sum::<u64>();
        start = pair_end;
    }
    let mut out = Vec::with_capacity(history.len() - start + 2);
    out.push(system.clone());
    out.extend_from_slice(&history[start..]);
    out.push(new_user.clone());
    Ok(out)
}

/// Prompt budget for a model: its window minus the tokens held for the reply.
pub fn prompt_budget(context_window: u32, reserved_output: u32) -> u64 {
    context_window.saturating_sub(reserved_output) as u64
}
