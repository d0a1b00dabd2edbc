// Single-flight guard: at most one generation request per session is ever
// in flight. Extra trigger clicks while busy are coalesced into a no-op
// (the button is also disabled, but the guard holds even without the DOM).

export class SingleFlight<T> {
  private inflight: Promise<T> | null = null;

  get busy(): boolean {
    return this.inflight !== null;
  }

  // Starts `task` unless one is already running; returns the running
  // promise either way.
  run(task: () => Promise<T>): Promise<T> {
    if (this.inflight === null) {
      this.inflight = task().finally(() => {
        this.inflight = null;
      });
    }
    return this.inflight;
  }
}
