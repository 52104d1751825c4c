"""Mention decoration, byte-compatible with the core pipeline.

The core and this sidecar must decorate identically or mention vectors
would be computed over different strings; a shared golden file pins the
parity in tests.
"""

from . import SidecarError


def decorate_mention(context: str, span: tuple[int, int], max_tokens: int = 256) -> str:
    """Wrap the inclusive token ``span`` of ``context`` in ``[M] ... [\\M]`` markers.

    Output is single-space joined and capped at ``max_tokens`` tokens total,
    markers included, with the window centered on the span.  The span itself
    is only shortened when it alone exceeds the cap.
    """
    tokens = context.split()
    start, end = span
    if not (0 <= start <= end < len(tokens)):
        raise SidecarError("decorate", f"span {span} out of bounds for {len(tokens)} tokens")

    budget = max_tokens - 2
    span_tokens = tokens[start : end + 1]
    if len(span_tokens) > budget:
        span_tokens = span_tokens[:budget]
    rem = budget - len(span_tokens)
    left_avail, right_avail = start, len(tokens) - 1 - end
    left_take = min(left_avail, rem // 2)
    right_take = min(right_avail, rem - left_take)
    left_take = min(left_avail, rem - right_take)
    left = tokens[start - left_take : start] if left_take else []
    right = tokens[end + 1 : end + 1 + right_take]
    return " ".join(left + ["[M]"] + span_tokens + ["[\\M]"] + right)
