import WebSocket from "ws";
import type { SocketFactory } from "../src/client";

/** Node-side stand-in for the browser WebSocket constructor. */
export const wsFactory: SocketFactory = (url) =>
  new WebSocket(url) as unknown as ReturnType<SocketFactory>;
