// Onboarding form model: validation and submission against /v1/onboard.
// The service owns the state machine; the form just reflects
// pending_test_message -> active transitions.

import type { ApiClient, OnboardRequest, OnboardState } from "./api.js";
import { ApiError } from "./api.js";

export interface OnboardingForm {
  phone: string;
  language: string;
  crops: string;          // comma separated in the input field
  lat: string;
  lon: string;
  summaryTime: string;    // single HH:MM field
}

export const LANGUAGES = ["en", "ur", "pa", "sd"];

export function validateForm(form: OnboardingForm): string[] {
  const problems: string[] = [];
  if (!/^\+\d{6,15}$/.test(form.phone.trim())) {
    problems.push("phone must look like +923001234567");
  }
  if (!LANGUAGES.includes(form.language)) {
    problems.push(`language must be one of ${LANGUAGES.join(", ")}`);
  }
  if (parseCrops(form.crops).length === 0) {
    problems.push("at least one crop is required");
  }
  const lat = Number(form.lat);
  const lon = Number(form.lon);
  if (!Number.isFinite(lat) || lat < -90 || lat > 90) problems.push("latitude out of range");
  if (!Number.isFinite(lon) || lon < -180 || lon > 180) problems.push("longitude out of range");
  if (form.summaryTime && !/^\d{2}:\d{2}$/.test(form.summaryTime)) {
    problems.push("summary time must be HH:MM");
  }
  return problems;
}

export function parseCrops(raw: string): string[] {
  return raw
    .split(",")
    .map((c) => c.trim().toLowerCase())
    .filter((c) => c.length > 0);
}

export function toRequest(form: OnboardingForm): OnboardRequest {
  return {
    phone: form.phone.trim(),
    language: form.language,
    crops: parseCrops(form.crops),
    location: [Number(form.lat), Number(form.lon)],
    summary_times: form.summaryTime ? [form.summaryTime] : [],
  };
}

export interface SubmitResult {
  state?: OnboardState;
  error?: string;
}

export async function submitOnboarding(api: ApiClient, form: OnboardingForm): Promise<SubmitResult> {
  const problems = validateForm(form);
  if (problems.length > 0) {
    return { error: problems.join("; ") };
  }
  try {
    return { state: await api.onboard(toRequest(form)) };
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      return { error: "that phone is already onboarded" };
    }
    return { error: String(err) };
  }
}
