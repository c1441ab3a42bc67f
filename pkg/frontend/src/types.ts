export type Vec3 = [number, number, number];

export interface AgentView {
  id: string;
  pose: Vec3;
  yaw: number;
  mode: string;
  task: string | null;
  home: Vec3 | null;
}

export interface TaskView {
  id: string;
  kind: string;
  location: Vec3;
  status: string; // pending | assigned | completed | unserviceable
  added_s: number;
  finished_s: number | null;
  execution_s: number | null;
  agent: string | null;
}

export interface GridSummary {
  dims: [number, number, number];
  resolution: number;
  origin: Vec3;
  counts?: Record<string, number>;
}

export interface Snapshot {
  format_version: number;
  clock: number;
  round: number;
  done: boolean;
  status: string;
  grid: GridSummary;
  agents: AgentView[];
  tasks: TaskView[];
}

export interface GridCells extends GridSummary {
  occupied: [number, number, number][];
  unknown: [number, number, number][];
}

export interface StreamEvent {
  kind: string;
  t?: number;
  [key: string]: unknown;
}

export interface MissionReport {
  duration_s: number;
  total_distance_m: number;
  n_agents: number;
  n_inspections: number;
  complete: boolean;
  tasks: Array<Record<string, unknown>>;
  text?: string;
  partial?: boolean;
}
