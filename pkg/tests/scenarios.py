"""Shared helpers for loading bundled scenario files in tests."""

from importlib.resources import files

from gazeintent.alignment import CameraPose
from gazeintent.harness import Scenario, WorkspaceConfig
from gazeintent.scene import WorkspaceObject
from gazeintent.traceio import parse_scenario


def load_bundled(name: str) -> Scenario:
    text = (files("gazeintent") / "data" / "scenarios" / f"{name}.scn").read_text()
    return parse_scenario(text)


def simple_workspace() -> WorkspaceConfig:
    def obj(oid, x, y, half=0.035):
        return WorkspaceObject(
            object_id=oid, label=oid,
            position=(x, y, 0.04),
            pre_grasp_position=(x, y, 0.30),
            pre_grasp_orientation=(0.0, 1.0, 0.0, 0.0),
            footprint=((x - half, y - half), (x + half, y - half),
                       (x + half, y + half), (x - half, y + half)),
            z_extent=(0.0, 0.08),
            surface_points=tuple(
                (x + dx, y + dy, z)
                for dx in (-half, half) for dy in (-half, half) for z in (0.0, 0.08)
            ),
        )

    return WorkspaceConfig(
        home=(0.0, 0.0, 0.40),
        z_floor=0.26,
        free_slots=((0.25, -0.35, 0.0),),
        objects=(obj("left", 0.45, 0.15), obj("right", 0.50, -0.12)),
        camera=CameraPose(rotation=(0.0, 1.0, 0.0, 0.0), translation=(-0.45, 0.0, 0.9),
                          intrinsics=(600.0, 600.0, 320.0, 240.0)),
    )
