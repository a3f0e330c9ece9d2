from cogscript.emulator import execute, parse_program
from cogscript.render import LEGEND, hand_row, render_grid, render_svg, render_trace
from cogscript.world import Scene, obj

SCENE = Scene(4, 3, (obj(0, "star", "yellow", 1, 1), obj(1, "circle", "green", 3, 0)))


def test_grid_codes_and_markers():
    r = execute(parse_program("scene_parse\nset_shape_attn(star)\ntop_down_attend"), SCENE)
    assert render_grid(r.final.working, r.final).splitlines() == [
        "   0  1  2  3",
        "0  .. .. .. gc",
        "1  .. yX ..+..",
        "2  .. .. .. ..",
    ]


def test_grid_without_state():
    assert render_grid(SCENE).splitlines()[2] == "1  .. yx .. .."
    assert "*" not in render_grid(SCENE) and "+" not in render_grid(SCENE)


def test_hand_row():
    r = execute(parse_program("scene_parse\nset_shape_attn(star)\ntop_down_attend\n"
                              "move_hand_to_object\ngrab_object"), SCENE)
    assert hand_row(r.final) == "H hand=(1,1) held=0 fixation=(2,1)"


def test_trace_legend_and_error():
    r = execute(parse_program("scene_parse\ngrab_object"), SCENE)
    text = render_trace(r)
    assert text.startswith(LEGEND)
    assert "step 1: scene_parse" in text and "step 2" not in text
    assert text.rstrip().endswith("grab_object with nothing under the hand")
    assert not render_trace(r, legend=False).startswith(LEGEND)


def test_svg():
    r = execute(parse_program("scene_parse\ntop_down_attend\nfixate_object"), SCENE)
    svg = render_svg(r.final, cell=10)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert 'width="40"' in svg and 'height="30"' in svg
