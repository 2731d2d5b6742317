"""Webhook-compatible chat endpoint emulating a WhatsApp-Business-like
message flow: onboarding with reply-to-activate, inbound text/voice
(voice is a text-carrying stub), per-phone FIFO handoff to the pipeline,
and outbound delivery through a provider interface with a recording mock.

Webhook payload schema (documented contract, one message per POST):

    {"provider_message_id": "<unique id>", "from_phone": "+92...",
     "kind": "text" | "voice", "body": "<text or transcript>",
     "timestamp": <utc seconds, optional>}
"""

from __future__ import annotations

import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .datastore import ChatRecord, DuplicatePhone, FarmProfile, Store
from .pipeline import AdvisoryReply, Alert

logger = logging.getLogger(__name__)

PENDING = "pending_test_message"
ACTIVE = "active"

TEST_MESSAGE = (
    "Welcome to your farm advisory service. Reply to this message to "
    "activate your account."
)
WELCOME_MESSAGE = (
    "Your account is now active. Ask about watering, fertilizer, soil, "
    "weather, or prices any time."
)


class MalformedPayload(ValueError):
    pass


class UnknownPhone(KeyError):
    pass


class ProviderRejected(RuntimeError):
    pass


@dataclass(frozen=True)
class InboundMessage:
    provider_message_id: str
    from_phone: str
    kind: str  # text | voice
    body: str
    received_at: float

    @classmethod
    def from_payload(cls, payload: dict, now: float) -> "InboundMessage":
        if not isinstance(payload, dict):
            raise MalformedPayload("payload must be a JSON object")
        for key in ("provider_message_id", "from_phone", "body"):
            value = payload.get(key)
            if not isinstance(value, str) or not value:
                raise MalformedPayload(f"missing or empty field {key!r}")
        kind = payload.get("kind", "text")
        if kind not in ("text", "voice"):
            raise MalformedPayload(f"bad message kind {kind!r}")
        return cls(
            provider_message_id=payload["provider_message_id"],
            from_phone=payload["from_phone"],
            kind=kind,
            body=payload["body"],
            received_at=float(payload.get("timestamp", now)),
        )


@dataclass
class OnboardingState:
    phone: str
    stage: str
    farm_id: str


class MessageProvider(Protocol):
    def deliver(self, message: dict) -> dict: ...


class MockMessageProvider:
    """Records deliveries in an inspectable outbox and deduplicates by
    message_id, so retried sends stay exactly-once visible."""

    def __init__(self):
        self.outbox: list[dict] = []
        self._seen: set[str] = set()
        self.reject_next = 0

    def deliver(self, message: dict) -> dict:
        if self.reject_next > 0:
            self.reject_next -= 1
            raise ProviderRejected("injected provider rejection")
        if message["message_id"] in self._seen:
            return {"message_id": message["message_id"], "status": "duplicate"}
        self._seen.add(message["message_id"])
        self.outbox.append(dict(message))
        return {"message_id": message["message_id"], "status": "sent"}

    def for_phone(self, phone: str) -> list[dict]:
        return [m for m in self.outbox if m["to_phone"] == phone]


class ChatService:
    """Front door for conversations. Inbound messages are deduplicated by
    provider id, queued FIFO per phone, and handed to the pipeline; every
    outbound message goes through the provider with retry + stable ids."""

    def __init__(
        self,
        store: Store,
        provider: MessageProvider,
        pipeline_handler: Callable[[FarmProfile, ChatRecord], AdvisoryReply] | None = None,
        translator: Callable[[str, str, str], str] | None = None,
        clock=time.time,
        sleep=time.sleep,
        send_retries: int = 2,
        retry_backoff_s: float = 0.5,
    ):
        self.store = store
        self.provider = provider
        self.pipeline_handler = pipeline_handler
        self.translator = translator or (lambda text, src, dst: text)
        self._clock = clock
        self._sleep = sleep
        self._send_retries = send_retries
        self._retry_backoff_s = retry_backoff_s
        self._seen_provider_ids: set[str] = set()
        self._queues: dict[str, deque[InboundMessage]] = {}
        self._out_seq = 0
        self._lock = threading.Lock()

    # -- onboarding --------------------------------------------------------

    def onboard(
        self,
        phone: str,
        language: str,
        crops: list[str],
        location: tuple[float, float],
        summary_times: list[str] | None = None,
        growth_stage: str | None = None,
    ) -> OnboardingState:
        """Store the profile pending and send the activation test message;
        the next inbound from this phone flips the account active and
        locks the language."""
        if self.store.farm_by_phone(phone) is not None:
            raise DuplicatePhone(phone)
        farm_id = f"farm-{len(self.store.list_farms()) + 1:04d}"
        profile = FarmProfile(
            farm_id=farm_id,
            phone=phone,
            language=language,
            crops=tuple(crops),
            location=tuple(location),
            summary_times=tuple(summary_times or ()),
            growth_stage=growth_stage,
            created_at=self._clock(),
        )
        self.store.register_farm(profile, stage=PENDING)
        self._send_text(profile, TEST_MESSAGE, kind_tag="onboarding")
        return OnboardingState(phone=phone, stage=PENDING, farm_id=farm_id)

    def onboarding_state(self, phone: str) -> OnboardingState:
        profile = self.store.farm_by_phone(phone)
        if profile is None:
            raise UnknownPhone(phone)
        return OnboardingState(
            phone=phone, stage=self.store.farm_stage(profile.farm_id), farm_id=profile.farm_id
        )

    # -- inbound -----------------------------------------------------------

    def receive(self, payload: dict, now: float | None = None) -> dict:
        """Validate, dedupe, and enqueue one webhook payload. Returns a
        small status document; raises MalformedPayload / UnknownPhone for
        the corresponding HTTP errors."""
        now = self._clock() if now is None else now
        message = InboundMessage.from_payload(payload, now)
        profile = self.store.farm_by_phone(message.from_phone)
        if profile is None:
            raise UnknownPhone(message.from_phone)
        with self._lock:
            if message.provider_message_id in self._seen_provider_ids:
                return {"status": "duplicate", "enqueued": False}
            self._seen_provider_ids.add(message.provider_message_id)
            self._queues.setdefault(message.from_phone, deque()).append(message)
        return {"status": "accepted", "enqueued": True}

    def pending_count(self) -> int:
        return sum(len(q) for q in self._queues.values())

    def process_pending(self) -> list[AdvisoryReply]:
        """Drain queues in per-phone FIFO order through the pipeline."""
        replies = []
        for phone in list(self._queues):
            queue = self._queues[phone]
            while queue:
                replies.append(self._process_one(queue.popleft()))
        return [r for r in replies if r is not None]

    def _process_one(self, message: InboundMessage) -> AdvisoryReply | None:
        profile = self.store.farm_by_phone(message.from_phone)
        if profile is None:
            return None
        record = ChatRecord(
            farm_id=profile.farm_id,
            direction="inbound",
            timestamp=message.received_at,
            body=message.body,
            language=profile.language,
            kind=message.kind,
        )
        self.store.append_chat(record)
        if self.store.farm_stage(profile.farm_id) == PENDING:
            # the reply-to-activate handshake; language is locked from here on
            self.store.set_farm_stage(profile.farm_id, ACTIVE)
            self._send_text(profile, WELCOME_MESSAGE, kind_tag="onboarding")
            return None
        if self.pipeline_handler is None:
            return None
        reply = self.pipeline_handler(profile, record)
        self.send(reply, profile.phone, as_voice=(message.kind == "voice"))
        return reply

    # -- outbound -----------------------------------------------------------

    def send(self, outbound: AdvisoryReply | Alert, to_phone: str, as_voice: bool = False) -> dict:
        """Deliver a reply or alert. A rejected delivery is retried with
        the same message id, so the provider-side dedup keeps exactly one
        visible copy."""
        profile = self.store.farm_by_phone(to_phone)
        if profile is None:
            raise UnknownPhone(to_phone)
        if isinstance(outbound, Alert):
            body = outbound.recommendation
            language = profile.language
            citations = [c.as_dict() for c in outbound.citations]
            if language != "en":
                body = self.translator(body, "en", language)
        else:
            body = outbound.text
            language = outbound.language
            citations = outbound.citation_dicts()
            if language != profile.language:
                logger.warning(
                    "outbound language %s differs from locked profile language %s",
                    language,
                    profile.language,
                )
        with self._lock:
            self._out_seq += 1
            message_id = f"out-{self._out_seq:06d}"
        # keep per-farm chat timestamps monotone even when the pipeline
        # runs on virtual time ahead of the wall clock
        sent_at = max(self._clock(), self.store.last_chat_ts(profile.farm_id) or 0.0)
        message = {
            "message_id": message_id,
            "to_phone": to_phone,
            "kind": "voice" if as_voice else "text",
            "body": body,
            "language": language,
            "citations": citations,
            "sent_at": sent_at,
        }
        receipt = self._deliver_with_retry(message)
        self.store.append_chat(
            ChatRecord(
                farm_id=profile.farm_id,
                direction="outbound",
                timestamp=message["sent_at"],
                body=body,
                language=language,
                kind=message["kind"],
                citations=tuple(citations),
            )
        )
        return receipt

    def _send_text(self, profile: FarmProfile, text: str, kind_tag: str) -> dict:
        body = text if profile.language == "en" else self.translator(text, "en", profile.language)
        reply = AdvisoryReply(
            text=body, language=profile.language, citations=[], generated_at=self._clock(),
            kind=kind_tag,
        )
        return self.send(reply, profile.phone)

    def _deliver_with_retry(self, message: dict) -> dict:
        attempts = 0
        delay = self._retry_backoff_s
        while True:
            try:
                return self.provider.deliver(message)
            except ProviderRejected as exc:
                attempts += 1
                if attempts > self._send_retries:
                    logger.error("provider rejected %s permanently", message["message_id"])
                    raise
                logger.warning("provider rejected %s (%s); retrying", message["message_id"], exc)
                self._sleep(delay)
                delay *= 2
