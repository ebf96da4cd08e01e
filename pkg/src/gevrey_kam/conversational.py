from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from gevrey_kam.config import GapsConfig
from gevrey_kam.errors import ConfigError, GevreyKamError
from gevrey_kam.graph.nodes.duality import duality_node
from gevrey_kam.graph.nodes.edges import edges_node
from gevrey_kam.graph.nodes.export import export_node
from gevrey_kam.graph.nodes.gaps import gaps_node
from gevrey_kam.graph.nodes.interval import interval_node
from gevrey_kam.graph.nodes.planner import planner_node
from gevrey_kam.graph.nodes.reduce import reduce_node
from gevrey_kam.graph.nodes.sumset import sumset_node
from gevrey_kam.graph.nodes.thickness import thickness_node
from gevrey_kam.types import ExperimentState

log = logging.getLogger(__name__)

Node = Callable[[ExperimentState], ExperimentState]

COMMAND_NODES: dict[str, Node] = {
    "reduce": reduce_node,
    "interval": interval_node,
    "duality": duality_node,
    "thickness": thickness_node,
    "sumset": sumset_node,
}


@dataclass
class Message:
    sender: str
    recipient: str
    content: str
    payload: dict = field(default_factory=dict)


class ConversationalAgent:
    """Lightweight agent wrapper around a pipeline node."""

    def __init__(self, name: str, fn: Optional[Node], next_agent: Optional[str]):
        self.name = name
        self.fn = fn
        self.next_agent = next_agent

    def handle(
        self, state: ExperimentState, msg: Message
    ) -> tuple[ExperimentState, Optional[Message]]:
        new_state = self.fn(state) if self.fn else state
        if self.next_agent:
            return new_state, Message(
                sender=self.name,
                recipient=self.next_agent,
                content="next",
                payload={"artifacts": len(new_state.artifacts)},
            )
        return new_state, None


class GapsAgent(ConversationalAgent):
    """Gap scan that hands the detected gaps to edge analysis when the config asks for it."""

    def __init__(self) -> None:
        super().__init__("gaps", gaps_node, "export")

    def handle(
        self, state: ExperimentState, msg: Message
    ) -> tuple[ExperimentState, Optional[Message]]:
        state = self.fn(state) if self.fn else state
        cfg = state.config
        if isinstance(cfg, GapsConfig) and cfg.edge_analysis:
            count = len(state.results["gaps"].gaps)
            log.info(f"GAPS: requesting edge analysis for {count} gaps")
            return state, Message(
                sender=self.name, recipient="edges", content="edge_request", payload={"gaps": count}
            )
        return state, Message(sender=self.name, recipient="export", content="complete")


class Orchestrator:
    """Runs agents off a FIFO message queue until it drains or `max_iterations` is hit."""

    max_iterations = 100

    def __init__(self, agents: dict[str, ConversationalAgent], start: str):
        self.agents = agents
        self.start = start

    def invoke(self, state: ExperimentState) -> ExperimentState:
        transcript: list[dict] = []
        pending = deque([Message(sender="cli", recipient=self.start, content="start")])
        rounds = 0
        try:
            while pending and rounds < self.max_iterations:
                rounds += 1
                msg = pending.popleft()
                log.info(f"ORCHESTRATOR: [{rounds}] {msg.sender} → {msg.recipient}: {msg.content}")
                transcript.append(
                    {
                        "iteration": rounds,
                        "from": msg.sender,
                        "to": msg.recipient,
                        "content": msg.content,
                        "payload_keys": sorted(msg.payload),
                    }
                )
                agent = self.agents.get(msg.recipient)
                if agent is None:
                    raise ConfigError(f"no agent '{msg.recipient}' on this route")
                try:
                    state, reply = agent.handle(state, msg)
                except GevreyKamError as e:
                    state.notes["failed_agent"] = agent.name
                    log.warning(f"ORCHESTRATOR: {agent.name} failed with {type(e).__name__}")
                    raise
                if reply is not None:
                    pending.append(reply)
        finally:
            state.notes["conversation_log"] = transcript
            state.notes["conversation_rounds"] = rounds

        if pending:
            log.warning(f"ORCHESTRATOR: stopped after {rounds} rounds, {len(pending)} pending")
        else:
            log.info(f"ORCHESTRATOR: Completed in {rounds} conversation rounds")
        return state


def build_orchestrator(command: str) -> Orchestrator:
    """planner → <command> → export; the gaps route passes through edges when asked."""
    if command == "gaps":
        work: dict[str, ConversationalAgent] = {
            "gaps": GapsAgent(),
            "edges": ConversationalAgent("edges", edges_node, "export"),
        }
    elif command in COMMAND_NODES:
        work = {command: ConversationalAgent(command, COMMAND_NODES[command], "export")}
    else:
        raise ConfigError(f"unknown command '{command}'")
    agents = {
        "planner": ConversationalAgent("planner", planner_node, command),
        **work,
        "export": ConversationalAgent("export", export_node, None),
    }
    return Orchestrator(agents=agents, start="planner")
