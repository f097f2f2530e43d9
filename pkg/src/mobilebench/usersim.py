"""Simulated phone owner that answers ``ask_user`` queries.

The scripted backend answers from ``key: value`` fact lines and refuses
everything else; the chat backend forwards the system prompt and dialogue to
an OpenAI-compatible chat-completion endpoint.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import httpx

from .device.state import Clock

USER_PROMPT_TEMPLATE = (
    "You are acting as a mobile phone user.\n"
    "An mobile GUI agent is executing a task on your phone.\n"
    "The task goal is: {goal}.\n"
    "You need to answer questions from the mobile GUI agent.\n"
    "The relevant information for the task is: {relevant_information}.\n"
    "If the question is not related to the task or no more task-related information is available, "
    "you need to refuse to answer in a polite manner.\n"
    "DO NOT make up any information. You can ONLY give the answer based on the relevant "
    "information and the task goal.\n"
    "Today is {today}. If the question is about the date, you need to answer the correct date "
    "based on the current date."
)

REFUSAL = "Sorry, I can't help with that. Please continue with the task."

_STOPWORDS = frozenset(
    "a an the is are was were be been am do does did what which who whom whose where when why how "
    "i me my you your we our it its to of in on at for from with by and or but not no yes can could "
    "would should will shall please tell give know need want like s any some this that these those "
    "there here should have has had about".split()
)
_DATE_WORDS = frozenset({"today", "date", "day", "weekday"})


class Backend(str, Enum):
    SCRIPTED = "scripted"
    CHAT = "chat_endpoint"


class Disposition(str, Enum):
    ANSWERED = "answered"
    REFUSED = "refused"


class EndpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class UserProfile:
    goal: str
    relevant_information: str = ""
    today: Clock = Clock()
    backend: Backend = Backend.SCRIPTED


@dataclass(frozen=True)
class UserReply:
    text: str
    disposition: Disposition


def build_user_prompt(profile: UserProfile) -> str:
    return USER_PROMPT_TEMPLATE.format(
        goal=profile.goal,
        relevant_information=profile.relevant_information,
        today=str(profile.today),
    )


def tokens(text: str) -> set[str]:
    words = re.findall(r"[a-z0-9]+", text.lower().replace("'s", ""))
    return {w for w in words if w not in _STOPWORDS}


def parse_facts(info: str) -> list[tuple[str, str]]:
    facts = []
    for line in info.splitlines():
        key, sep, value = line.partition(":")
        if sep and key.strip() and value.strip():
            facts.append((key.strip(), value.strip()))
    return facts


def scripted_answer(profile: UserProfile, question: str) -> UserReply:
    q = tokens(question)
    best: tuple[int, str] | None = None
    for key, value in parse_facts(profile.relevant_information):
        overlap = len(q & tokens(key))
        # strict ">" keeps the first declared fact on ties
        if overlap > 0 and (best is None or overlap > best[0]):
            best = (overlap, value)
    asks_date = "today" in q or (best is None and q & _DATE_WORDS)
    if asks_date:
        return UserReply(profile.today.date, Disposition.ANSWERED)
    if best is not None:
        return UserReply(best[1], Disposition.ANSWERED)
    return UserReply(REFUSAL, Disposition.REFUSED)


class SimulatedUser:
    """Answers agent questions for one episode."""

    def __init__(self, profile: UserProfile, *, base_url: str | None = None, model: str | None = None,
                 api_key_env: str = "MOBILEBENCH_USER_API_KEY", client: httpx.Client | None = None,
                 timeout: float = 60.0):
        self.profile = profile
        self.base_url = base_url or os.environ.get("MOBILEBENCH_USER_BASE_URL", "")
        self.model = model or os.environ.get("MOBILEBENCH_USER_MODEL", "gpt-4.1")
        self.api_key_env = api_key_env
        self._client = client
        self.timeout = timeout

    def answer_query(self, question: str, dialogue_so_far: Sequence[tuple[str, str]] = ()) -> UserReply:
        if not question or not question.strip():
            raise ValueError("question must be non-empty")
        if self.profile.backend is Backend.SCRIPTED:
            return scripted_answer(self.profile, question)
        return self._chat(question, dialogue_so_far)

    def _chat(self, question: str, dialogue: Sequence[tuple[str, str]]) -> UserReply:
        messages = [{"role": "system", "content": build_user_prompt(self.profile)}]
        for asked, replied in dialogue:
            messages.append({"role": "user", "content": asked})
            messages.append({"role": "assistant", "content": replied})
        messages.append({"role": "user", "content": question})
        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {"model": self.model, "messages": messages, "temperature": 0.0}
        client = self._client or httpx.Client(timeout=self.timeout)
        try:
            resp = client.post(self.base_url.rstrip("/") + "/chat/completions", json=payload, headers=headers)
            resp.raise_for_status()
            text = resp.json()["choices"][0]["message"]["content"] or ""
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as e:
            raise EndpointError(str(e)) from e
        finally:
            if self._client is None:
                client.close()
        fact_tokens = tokens(self.profile.relevant_information) | {self.profile.today.date}
        answered = bool(tokens(text) & fact_tokens) or self.profile.today.date in text
        return UserReply(text.strip(), Disposition.ANSWERED if answered else Disposition.REFUSED)


def answer_query(profile: UserProfile, question: str, dialogue_so_far: Sequence[tuple[str, str]] = ()) -> UserReply:
    return SimulatedUser(profile).answer_query(question, dialogue_so_far)
