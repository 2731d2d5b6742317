// DOM wiring for the operator UI: onboarding form, farm selector, chat
// panel with citation chips, trend chart with alert markers, alert feed.
// All state lives in the service; a refresh rebuilds the view from the
// API alone.

import { ApiClient, type AlertRecord, type Citation, type FarmSummary } from "./api.js";
import { drawTrendChart } from "./chart.js";
import {
  ChatEntry,
  chipLabel,
  citationDetailText,
  entryFromReply,
  mergeOutbox,
  validateMessage,
} from "./chat.js";
import { LANGUAGES, OnboardingForm, submitOnboarding } from "./onboarding.js";
import { DEFAULT_POLL_MS, startPolling } from "./poller.js";

const api = new ApiClient("");
const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const METRICS = ["moisture", "ph", "ec", "temperature", "nitrogen", "phosphorus", "potassium"];

let currentFarm: FarmSummary | null = null;
let entries: ChatEntry[] = [];
let currentAlerts: AlertRecord[] = [];
let sendSeq = 0;

function setStatus(text: string): void {
  $("status").textContent = text;
}

// -- farm selection ---------------------------------------------------------

async function refreshFarms(): Promise<void> {
  const farms = await api.farms();
  const select = $<HTMLSelectElement>("farm-select");
  const previous = select.value;
  select.innerHTML = "";
  for (const farm of farms) {
    if (farm.farm_id.startsWith("auto-")) continue;
    const option = document.createElement("option");
    option.value = farm.farm_id;
    option.textContent = `${farm.farm_id} (${farm.crops.join("/")}, ${farm.language}, ${farm.stage})`;
    select.appendChild(option);
  }
  if (previous && farms.some((f) => f.farm_id === previous)) {
    select.value = previous;
  }
  const chosen = farms.find((f) => f.farm_id === select.value) ?? null;
  if (chosen && chosen.farm_id !== currentFarm?.farm_id) {
    currentFarm = chosen;
    entries = [];
    renderChat();
  } else {
    currentFarm = chosen;
  }
}

// -- chat panel ----------------------------------------------------------------

function renderChat(): void {
  const list = $("chat-list");
  list.innerHTML = "";
  for (const entry of entries) {
    const row = document.createElement("div");
    row.className = `msg ${entry.direction}`;
    const bubble = document.createElement("div");
    bubble.className = "bubble";
    if (entry.kind === "voice") {
      const badge = document.createElement("span");
      badge.className = "voice-badge";
      badge.textContent = "voice";
      bubble.appendChild(badge);
    }
    const text = document.createElement("span");
    text.textContent = entry.body;
    bubble.appendChild(text);
    const chips = document.createElement("div");
    chips.className = "chips";
    for (const citation of entry.citations) {
      chips.appendChild(makeChip(citation));
    }
    bubble.appendChild(chips);
    row.appendChild(bubble);
    list.appendChild(row);
  }
  list.scrollTop = list.scrollHeight;
}

function makeChip(citation: Citation): HTMLElement {
  const chip = document.createElement("button");
  chip.className = `chip ${citation.kind}`;
  chip.textContent = chipLabel(citation);
  const detail = document.createElement("div");
  detail.className = "chip-detail hidden";
  chip.addEventListener("click", async () => {
    if (detail.classList.contains("hidden")) {
      if (!detail.textContent) {
        try {
          detail.textContent = citationDetailText(await api.resolveCitation(citation));
        } catch (err) {
          detail.textContent = `could not resolve: ${err}`;
        }
      }
      detail.classList.remove("hidden");
    } else {
      detail.classList.add("hidden");
    }
  });
  const wrap = document.createElement("span");
  wrap.appendChild(chip);
  wrap.appendChild(detail);
  return wrap;
}

async function sendMessage(): Promise<void> {
  const input = $<HTMLInputElement>("chat-input");
  const asVoice = $<HTMLInputElement>("voice-flag").checked;
  const problem = validateMessage(input.value);
  if (problem || !currentFarm) return;
  const body = input.value.trim();
  input.value = "";
  updateSendDisabled();
  sendSeq += 1;
  entries.push({
    key: `local-${sendSeq}`,
    direction: "inbound",
    body,
    kind: asVoice ? "voice" : "text",
    language: currentFarm.language,
    citations: [],
  });
  renderChat();
  const result = await api.sendChat(currentFarm.farm_id, body, asVoice ? "voice" : "text");
  if (result.reply) {
    entries.push(entryFromReply(result.reply, `reply-${sendSeq}`));
  }
  renderChat();
  setStatus(result.reply ? "reply received" : `account ${result.stage}`);
}

function updateSendDisabled(): void {
  const input = $<HTMLInputElement>("chat-input");
  $<HTMLButtonElement>("chat-send").disabled =
    validateMessage(input.value) !== null || currentFarm === null;
}

// -- trend chart + alerts -----------------------------------------------------

async function refreshTrendAndAlerts(): Promise<void> {
  if (!currentFarm) return;
  const metric = $<HTMLSelectElement>("metric-select").value;
  const [points, alerts] = await Promise.all([
    api.series(currentFarm.farm_id, metric),
    api.alerts(currentFarm.farm_id),
  ]);
  currentAlerts = alerts;
  drawTrendChart($<HTMLCanvasElement>("trend-canvas"), points, alerts, metric);
  try {
    const trend = await api.trend(currentFarm.farm_id, metric);
    $("trend-flag").textContent =
      `${metric}: ${trend.flag} (${trend.slope_per_day.toFixed(3)}/day over ${trend.window_days}d)`;
  } catch {
    $("trend-flag").textContent = `${metric}: not enough data for a trend`;
  }
  const feed = $("alert-feed");
  feed.innerHTML = "";
  for (const alert of [...alerts].reverse()) {
    const item = document.createElement("div");
    item.className = `alert ${alert.severity}`;
    item.textContent = `[${alert.severity}] ${alert.metric}=${alert.observed}: ${alert.recommendation}`;
    feed.appendChild(item);
  }
}

async function pollOutbox(): Promise<void> {
  if (!currentFarm) return;
  const outbox = await api.outbox(currentFarm.phone);
  const merged = mergeOutbox(entries, outbox);
  if (merged.length !== entries.length) {
    entries = merged;
    renderChat();
  }
}

// -- onboarding -----------------------------------------------------------------

async function handleOnboard(): Promise<void> {
  const form: OnboardingForm = {
    phone: $<HTMLInputElement>("ob-phone").value,
    language: $<HTMLSelectElement>("ob-language").value,
    crops: $<HTMLInputElement>("ob-crops").value,
    lat: $<HTMLInputElement>("ob-lat").value,
    lon: $<HTMLInputElement>("ob-lon").value,
    summaryTime: $<HTMLInputElement>("ob-summary").value,
  };
  const result = await submitOnboarding(api, form);
  const out = $("ob-result");
  if (result.error) {
    out.textContent = result.error;
    out.className = "error";
    return;
  }
  out.textContent = `${result.state!.farm_id}: ${result.state!.stage} — reply to the test message (send any chat) to activate`;
  out.className = "ok";
  await refreshFarms();
}

// -- boot -------------------------------------------------------------------------

export function boot(): void {
  const languageSelect = $<HTMLSelectElement>("ob-language");
  for (const lang of LANGUAGES) {
    const option = document.createElement("option");
    option.value = lang;
    option.textContent = lang;
    languageSelect.appendChild(option);
  }
  const metricSelect = $<HTMLSelectElement>("metric-select");
  for (const metric of METRICS) {
    const option = document.createElement("option");
    option.value = metric;
    option.textContent = metric;
    metricSelect.appendChild(option);
  }

  $("ob-submit").addEventListener("click", () => void handleOnboard());
  $("chat-send").addEventListener("click", () => void sendMessage());
  $<HTMLInputElement>("chat-input").addEventListener("input", updateSendDisabled);
  $<HTMLInputElement>("chat-input").addEventListener("keydown", (event) => {
    if (event.key === "Enter" && validateMessage($<HTMLInputElement>("chat-input").value) === null) {
      void sendMessage();
    }
  });
  $<HTMLSelectElement>("farm-select").addEventListener("change", () => {
    void refreshFarms().then(refreshTrendAndAlerts);
  });
  $<HTMLSelectElement>("metric-select").addEventListener("change", () => void refreshTrendAndAlerts());

  updateSendDisabled();
  void refreshFarms().then(refreshTrendAndAlerts);
  startPolling(async () => {
    await refreshFarms();
    await pollOutbox();
    await refreshTrendAndAlerts();
  }, DEFAULT_POLL_MS);
}

if (typeof document !== "undefined" && document.getElementById("farm-select")) {
  boot();
}
