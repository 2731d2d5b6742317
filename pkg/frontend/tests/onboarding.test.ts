import { describe, expect, it } from "vitest";

import type { ApiClient } from "../src/api.js";
import { ApiError } from "../src/api.js";
import { parseCrops, submitOnboarding, toRequest, validateForm, type OnboardingForm } from "../src/onboarding.js";

function form(overrides: Partial<OnboardingForm> = {}): OnboardingForm {
  return {
    phone: "+923001234567",
    language: "ur",
    crops: "cotton, maize",
    lat: "31.5",
    lon: "74.3",
    summaryTime: "07:00",
    ...overrides,
  };
}

describe("validateForm", () => {
  it("accepts a complete form", () => {
    expect(validateForm(form())).toEqual([]);
  });

  it("flags each broken field", () => {
    expect(validateForm(form({ phone: "12345" }))[0]).toMatch(/phone/);
    expect(validateForm(form({ language: "fr" }))[0]).toMatch(/language/);
    expect(validateForm(form({ crops: " , " }))[0]).toMatch(/crop/);
    expect(validateForm(form({ lat: "123" }))[0]).toMatch(/latitude/);
    expect(validateForm(form({ summaryTime: "7am" }))[0]).toMatch(/HH:MM/);
  });
});

describe("toRequest", () => {
  it("normalizes crops and location", () => {
    const req = toRequest(form({ crops: " Cotton ,MAIZE " }));
    expect(req.crops).toEqual(["cotton", "maize"]);
    expect(req.location).toEqual([31.5, 74.3]);
    expect(req.summary_times).toEqual(["07:00"]);
  });

  it("parses crop lists robustly", () => {
    expect(parseCrops("a,,b ,")).toEqual(["a", "b"]);
  });
});

describe("submitOnboarding", () => {
  it("returns the pending state from the service", async () => {
    const api = {
      onboard: async () => ({ phone: "+92", stage: "pending_test_message", farm_id: "farm-0001" }),
    } as unknown as ApiClient;
    const result = await submitOnboarding(api, form());
    expect(result.state?.stage).toBe("pending_test_message");
  });

  it("maps 409 to a friendly duplicate-phone error", async () => {
    const api = {
      onboard: async () => {
        throw new ApiError(409, "phone already onboarded");
      },
    } as unknown as ApiClient;
    const result = await submitOnboarding(api, form());
    expect(result.error).toMatch(/already onboarded/);
  });

  it("rejects invalid forms without calling the service", async () => {
    let called = false;
    const api = {
      onboard: async () => {
        called = true;
        return {};
      },
    } as unknown as ApiClient;
    const result = await submitOnboarding(api, form({ phone: "oops" }));
    expect(result.error).toBeTruthy();
    expect(called).toBe(false);
  });
});
