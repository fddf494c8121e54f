export * from "./types";
export * from "./render";
export * from "./inputs";
export * from "./client";
export * from "./trialflow";
export * from "./results";
