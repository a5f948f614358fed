// Orbit/fly camera input: pointer-drag orbits around the focus target,
// keys translate. Outgoing setCamera traffic is rate-capped.

export class OrbitCamera {
  target: [number, number, number];
  distance: number;
  yaw: number; // radians around +y
  pitch: number; // radians, clamped away from the poles

  constructor(position: number[], lookAt: number[]) {
    this.target = [lookAt[0], lookAt[1], lookAt[2]];
    const dx = position[0] - lookAt[0];
    const dy = position[1] - lookAt[1];
    const dz = position[2] - lookAt[2];
    this.distance = Math.max(Math.hypot(dx, dy, dz), 1e-6);
    this.yaw = Math.atan2(dx, dz);
    this.pitch = Math.asin(Math.max(-1, Math.min(1, dy / this.distance)));
  }

  rotate(dxPx: number, dyPx: number, radPerPx = 0.005): void {
    this.yaw -= dxPx * radPerPx;
    this.pitch += dyPx * radPerPx;
    const limit = (85 * Math.PI) / 180;
    this.pitch = Math.max(-limit, Math.min(limit, this.pitch));
  }

  zoom(factor: number): void {
    this.distance = Math.max(0.05, this.distance * factor);
  }

  // translate target and camera together in view-aligned axes
  translate(rightM: number, upM: number, forwardM: number): void {
    const [fx, fy, fz] = this.forward();
    const rx = fz;
    const rz = -fx;
    const rlen = Math.hypot(rx, rz) || 1;
    this.target[0] += (rx / rlen) * rightM + fx * forwardM;
    this.target[1] += upM + fy * forwardM;
    this.target[2] += (rz / rlen) * rightM + fz * forwardM;
  }

  forward(): [number, number, number] {
    const cp = Math.cos(this.pitch);
    return [-Math.sin(this.yaw) * cp, -Math.sin(this.pitch), -Math.cos(this.yaw) * cp];
  }

  position(): [number, number, number] {
    const [fx, fy, fz] = this.forward();
    return [
      this.target[0] - fx * this.distance,
      this.target[1] - fy * this.distance,
      this.target[2] - fz * this.distance,
    ];
  }

  lookAt(): [number, number, number] {
    return [this.target[0], this.target[1], this.target[2]];
  }
}

export class RateLimiter {
  private readonly intervalMs: number;
  private last = -Infinity;

  constructor(maxPerSecond: number) {
    this.intervalMs = 1000 / maxPerSecond;
  }

  allow(nowMs: number): boolean {
    if (nowMs - this.last >= this.intervalMs) {
      this.last = nowMs;
      return true;
    }
    return false;
  }
}
