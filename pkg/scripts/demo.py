#!/usr/bin/env python3
"""
Demo script for the swarm toolkit
"""

import sys
import tempfile
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

def test_configuration():
    """Test configuration system"""
    print("🔧 Testing configuration system...")

    try:
        from swarmforge.core.config import config

        groups = config.get("swarm.groups", 8)
        print(f"   - Groups per swarm: {groups}")

        alpha = config.get("planner.alpha", 30)
        beta = config.get("planner.beta", 4)
        print(f"   - Collision penalty: {alpha} * Q^{beta}")

        frames = config.get("scenario.frames", 100)
        print(f"   - Scenario frames: {frames}")

        print("✅ Configuration system working")
        return True

    except Exception as e:
        print(f"❌ Configuration test failed: {e}")
        return False

def test_tensor_swarm():
    """Test the tensor update against the per-particle loop"""
    print("🧮 Testing tensor swarm...")

    try:
        from swarmforge.benchmarks import get_benchmark
        from swarmforge.core.runner import run_dppso_reference, run_dtpso
        from swarmforge.core.swarm import HyperMatrix

        hypers = HyperMatrix.preset("table8")
        problem = get_benchmark("BF3", 10)

        tensor = run_dtpso(problem, hypers, 8, 10, 100, seed=1)
        loop = run_dppso_reference(problem, hypers, 8, 10, 100, seed=1)

        print(f"   - {problem.spec.name}: best {tensor.best_f:.4f} after {tensor.iterations} iterations")
        print(f"   - Tensor {tensor.wall_seconds * 1000:.1f} ms, loop {loop.wall_seconds * 1000:.1f} ms")
        print(f"   - Traces identical: {tensor.trace == loop.trace}")

        print("✅ Tensor swarm working")
        return tensor.trace == loop.trace

    except Exception as e:
        print(f"❌ Tensor swarm test failed: {e}")
        return False

def test_collision_counting():
    """Test path fitness on a single block"""
    print("🚧 Testing collision counting...")

    try:
        from swarmforge.geometry import Obstacle, Path, Point2, PolygonWorld, count_intersections

        world = PolygonWorld(366, 366, Point2(50, 150), Point2(50, 170),
                             obstacles=(Obstacle.rectangle(100, 100, 100, 100),))
        through = Path((Point2(250, 150), Point2(250, 170)))
        around = Path((Point2(50, 250), Point2(50, 250)))

        print(f"   - Path through the block: Q = {count_intersections(through, world)}")
        print(f"   - Path beside the block: Q = {count_intersections(around, world)}")

        print("✅ Collision counting working")
        return count_intersections(through, world) == 4

    except Exception as e:
        print(f"❌ Collision counting test failed: {e}")
        return False

def test_planning():
    """Test a few frames of the dynamic scenario"""
    print("🗺️  Testing dynamic planning...")

    try:
        from swarmforge.core.planner import PlannerConfig
        from swarmforge.simenv import ScenarioConfig, run_scenario

        scenario = ScenarioConfig(frames=5, seed=0)
        planner = PlannerConfig(particles_per_group=40)
        metrics = run_scenario(scenario, "sepso", planner_config=planner)

        for record in metrics.records:
            print(f"     * frame {record.frame}: length {record.path_length:.1f} cm, "
                  f"{record.iterations} iterations, Q={record.q} ({record.reason})")
        print(f"   - Collision-free frames: {metrics.collision_free_fraction:.0%}")

        print("✅ Dynamic planning working")
        return True

    except Exception as e:
        print(f"❌ Dynamic planning test failed: {e}")
        return False

def test_database():
    """Test database functionality"""
    print("🗄️  Testing database...")

    try:
        from swarmforge.data.database import DatabaseManager

        with tempfile.TemporaryDirectory() as tmp:
            db = DatabaseManager(f"sqlite:///{Path(tmp) / 'demo.db'}")

            # Test database connection
            session = db.get_session()
            session.close()
            db.engine.dispose()

        print("   - Database connection successful")
        print("   - Tables created/verified")

        print("✅ Database working")
        return True

    except Exception as e:
        print(f"❌ Database test failed: {e}")
        return False

def main():
    """Main demo function"""
    print("🎯 Swarm Toolkit Demo")
    print("=" * 40)

    tests = [
        test_configuration,
        test_database,
        test_collision_counting,
        test_tensor_swarm,
        test_planning,
    ]

    results = []
    for test in tests:
        try:
            result = test()
            results.append(result)
            print()
        except Exception as e:
            print(f"❌ Test failed with exception: {e}")
            results.append(False)
            print()

    print("=" * 40)
    print("📊 Results Summary")
    print(f"Tests passed: {sum(results)}/{len(results)}")

    if all(results):
        print("🎉 All tests passed! System is ready.")
        print("\nTo run a full experiment:")
        print("   python -m swarmforge evolve --problem path --out runs/evolve")
        print("   python -m swarmforge plan --hypers runs/evolve/hypers.json --out runs/plan")
    else:
        print("⚠️  Some tests failed. Check dependencies:")
        print("   pip install -r requirements.txt")

if __name__ == "__main__":
    main()
