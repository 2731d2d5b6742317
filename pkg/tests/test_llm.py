from __future__ import annotations

import json
import time

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farmsense.llm import (
    NO_REFERENCES_LINE,
    PERSONA_PROMPT,
    BackendConfig,
    BackendError,
    MockBackend,
    ModelRequest,
    RemoteBackend,
    TemplateError,
    UnsupportedLanguage,
    make_backend,
    mock_translate,
    render_prompt,
    validate_script,
)

URDU_SENTENCE = "آپ کے کھیت کی مٹی میں نمی کم ہو رہی ہے"
GURMUKHI_SENTENCE = "ਤੁਹਾਡੀ ਫ਼ਸਲ ਦੀ ਮਿੱਟੀ ਵਿੱਚ ਨਮੀ ਘੱਟ ਹੈ"


@pytest.fixture(scope="module")
def mock() -> MockBackend:
    return MockBackend()


def intent_request(message: str, crop: str = "cotton") -> ModelRequest:
    return render_prompt(
        "intent", {"message": message, "crop": crop, "reply_language": "en"}
    )


class TestMockBackend:
    def test_same_request_twice_is_byte_identical(self, mock):
        request = intent_request("Should I irrigate today?")
        assert mock.complete(request) == mock.complete(request)

    def test_irrigation_intent_follows_rule_table(self, mock):
        out = mock.complete(intent_request("Should I irrigate today?"))
        doc = json.loads(out)
        assert doc == {
            "v": 1,
            "metrics": [{"kind": "moisture", "window": "last_7d"}],
            "forecast_days": 2,
            "needs_market": False,
            "kb_query": "irrigation scheduling cotton",
            "reply_language": "en",
        }

    def test_unmatched_intent_falls_back_to_default(self, mock):
        out = mock.complete(intent_request("how do I control leaf spot"))
        doc = json.loads(out)
        assert doc["kb_query"] == "how do I control leaf spot"
        assert doc["metrics"] == []

    def test_default_fills_variables(self, mock):
        request = ModelRequest(
            stage="synthesis",
            system_prompt=PERSONA_PROMPT,
            user_payload="totally unmatched payload",
            variables={"crop": "maize", "inputs_summary": "moisture 55%.", "passage_note": ""},
        )
        out = mock.complete(request)
        assert "maize" in out and "moisture 55%." in out

    @given(
        payload=st.text(
            alphabet=st.characters(whitelist_categories=("Ll", "Nd", "Zs")), max_size=60
        )
    )
    @settings(max_examples=40, deadline=None)
    def test_referentially_transparent(self, payload):
        backend = MockBackend()
        request = ModelRequest(
            stage="synthesis",
            system_prompt=PERSONA_PROMPT,
            user_payload=payload,
            variables={"crop": "maize", "inputs_summary": "", "passage_note": ""},
        )
        assert backend.complete(request) == MockBackend().complete(request)


class TestTranslate:
    def test_identity_when_same_language(self, mock):
        assert mock.translate("hello 30%", "en", "en") == "hello 30%"

    def test_round_trip_en_ur(self, mock):
        original = "Irrigate by tomorrow evening; moisture is 30%."
        there = mock.translate(original, "en", "ur")
        assert there.startswith("⟪ur⟫")
        assert mock.translate(there, "ur", "en") == original

    def test_unsupported_language(self, mock):
        with pytest.raises(UnsupportedLanguage):
            mock.translate("hi", "en", "xx")

    def test_mock_output_passes_script_validation(self, mock):
        out = mock.translate("Your field moisture dropped to 30 percent today.", "en", "pa")
        assert validate_script(out, "pa") is None

    def test_digits_and_punctuation_survive(self):
        out = mock_translate("pH 6.5 (ok)", "en", "sd")
        assert "6.5" in out and "(" in out


class TestValidateScript:
    def test_arabic_script_urdu_is_valid(self):
        assert validate_script(URDU_SENTENCE, "ur") is None

    def test_gurmukhi_under_pa_is_rejected(self):
        issue = validate_script(GURMUKHI_SENTENCE, "pa")
        assert issue is not None
        assert issue.detected_block == "Gurmukhi"

    def test_latin_under_sd_is_rejected(self):
        issue = validate_script("this is plain english text", "sd")
        assert issue is not None
        assert issue.detected_block == "Latin"

    def test_no_letters_is_valid(self):
        assert validate_script("30% — 5mm?!"[:4], "ur") is None

    def test_en_not_checkable(self):
        with pytest.raises(UnsupportedLanguage):
            validate_script("hello", "en")


class TestRenderPrompt:
    def test_passages_embed_their_citations(self):
        request = render_prompt(
            "synthesis",
            {
                "crop": "cotton",
                "stage": "vegetative",
                "location": "31.5,74.3",
                "question": "Should I irrigate?",
                "inputs_summary": "moisture 30%",
                "history_block": "(none)",
                "passages": [
                    ("Cotton Extension Manual §Irrigation ¶0", "Keep soil moisture..."),
                    ("Cotton Extension Manual §Irrigation ¶1", "Schedule irrigation..."),
                ],
            },
        )
        assert "Cotton Extension Manual §Irrigation ¶0" in request.user_payload
        assert "Cotton Extension Manual §Irrigation ¶1" in request.user_payload
        assert request.system_prompt == PERSONA_PROMPT

    def test_missing_variable_names_placeholder(self):
        with pytest.raises(TemplateError) as exc:
            render_prompt("intent", {"message": "hi", "crop": "maize"})
        assert exc.value.placeholder == "reply_language"

    def test_zero_passages_renders_no_references_branch(self):
        request = render_prompt(
            "synthesis",
            {
                "crop": "cotton",
                "stage": "vegetative",
                "location": "31.5,74.3",
                "question": "q",
                "inputs_summary": "",
                "history_block": "",
                "passages": [],
            },
        )
        assert NO_REFERENCES_LINE in request.user_payload


class TestRemoteBackend:
    def _request(self) -> ModelRequest:
        return ModelRequest(stage="judge", system_prompt="s", user_payload="u")

    def test_success_parses_chat_completion_shape(self):
        def handler(req: httpx.Request) -> httpx.Response:
            body = json.loads(req.content)
            assert body["model"] == "test-model"
            assert body["messages"][1]["content"] == "u"
            return httpx.Response(200, json={"choices": [{"message": {"content": "scored"}}]})

        backend = RemoteBackend(
            "https://llm.test/v1/chat",
            model="test-model",
            client=httpx.Client(transport=httpx.MockTransport(handler)),
        )
        assert backend.complete(self._request()) == "scored"

    def test_http_status_maps_to_backend_error(self):
        backend = RemoteBackend(
            "https://llm.test/v1/chat",
            model="m",
            client=httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(500))),
        )
        with pytest.raises(BackendError) as exc:
            backend.complete(self._request())
        assert exc.value.status == 500

    def test_backend_down_errors_within_timeout(self):
        backend = RemoteBackend(
            "http://127.0.0.1:9", model="m", timeout_s=2.0  # port 9: nothing listens
        )
        started = time.monotonic()
        with pytest.raises(BackendError):
            backend.complete(self._request())
        assert time.monotonic() - started < 2.5


class TestConfig:
    def test_mock_kind(self):
        assert isinstance(make_backend(BackendConfig(kind="mock")), MockBackend)

    def test_remote_requires_endpoint(self):
        with pytest.raises(ValueError):
            make_backend(BackendConfig(kind="remote"))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_backend(BackendConfig(kind="tiny-llama"))
