"""Message propagation and delivery rules for the three network modes.

Exchange is an ideal epidemic: whenever exactly one endpoint of a contact
carries a live message, the other endpoint receives a copy, regardless of
node class and with no buffer, bandwidth, or energy limits. Delivery is
evaluated after all of a step's exchanges, so a message relayed and
delivered in the same step is stamped with that step.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .core import MessageRecord, NodeClass, NodeRecord, RoutingMode
from .contact import ContactEvent

__all__ = ["RoutingMode", "exchange", "check_delivery", "expire"]


def exchange(
    message: MessageRecord, event: ContactEvent, mode: RoutingMode
) -> MessageRecord:
    """Copy a live message across one contact.

    In DTN and hybrid modes the non-carrying endpoint joins the carrier set
    when exactly one endpoint carries; a source-only (UPN) network never
    relays, so the carrier set stays at the origin.
    """
    if not message.active or mode is RoutingMode.UPN:
        return message
    a_has = event.node_a in message.carriers
    b_has = event.node_b in message.carriers
    if a_has != b_has:
        message.carriers.add(event.node_b if a_has else event.node_a)
    return message


def check_delivery(
    message: MessageRecord,
    nodes: Sequence[NodeRecord],
    events_at_step: Iterable[ContactEvent],
    mode: RoutingMode,
    step: int,
) -> MessageRecord:
    """Mark a message delivered at this step if the mode's rule is met.

    DTN: some carrier is a destination or is in contact with one this step.
    Hybrid: the DTN rule, or any carrier is internet-capable.
    UPN: the originating patient is in contact with a destination or with
    any internet-capable node this step.
    """
    if not message.active:
        return message

    by_id = {n.id: n for n in nodes}
    dests = {n.id for n in nodes if n.node_class is NodeClass.DESTINATION}

    delivered = False
    if mode in (RoutingMode.DTN, RoutingMode.HYBRID):
        if message.carriers & dests:
            delivered = True
        else:
            for ev in events_at_step:
                if (ev.node_a in dests and ev.node_b in message.carriers) or (
                    ev.node_b in dests and ev.node_a in message.carriers
                ):
                    delivered = True
                    break
        if not delivered and mode is RoutingMode.HYBRID:
            delivered = any(by_id[c].internet_capable for c in message.carriers)
    else:  # UPN
        origin = message.origin_patient

        def qualifies(node_id: int) -> bool:
            node = by_id[node_id]
            return node.id in dests or node.internet_capable

        for ev in events_at_step:
            if ev.node_a == origin and qualifies(ev.node_b):
                delivered = True
                break
            if ev.node_b == origin and qualifies(ev.node_a):
                delivered = True
                break

    if delivered:
        message.delivered = True
        message.delivered_step = step
    return message


def expire(message: MessageRecord, step: int) -> MessageRecord:
    """Expire an undelivered message once it has outlived its TTL.

    The boundary is strict: a message is still live at exactly ttl_steps of
    age and expires one step later.
    """
    if message.delivered or message.expired:
        return message
    if step - message.created_step > message.ttl_steps:
        message.expired = True
    return message
