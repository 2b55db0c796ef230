import dataclasses

from django.core.management.base import BaseCommand

from apps.common.streams import RandomStream
from apps.control.constraints import dump_feasible_set
from apps.optimizer.problem import HorizonProblem, effective_horizon
from apps.optimizer.services import SolverService
from apps.simulation.forecast import ErrorProfile, make_forecast
from apps.simulation.manifest import add_manifest_arguments, command_errors, manifest_from_options
from apps.simulation.outputs import run_directory, write_convergence, write_pareto
from apps.simulation.registry import record_run


class Command(BaseCommand):
    help = "Resuelve un único problema MOMPC en un slot y escribe el frente de Pareto y la convergencia."

    def add_arguments(self, parser):
        add_manifest_arguments(parser)
        parser.add_argument("--slot", type=int, default=1, help="Slot (1-based) en el que se resuelve.")
        parser.add_argument("--dump-constraints", action="store_true",
                            help="Escribe además constraints.csv con el conjunto factible.")

    def handle(self, *args, **options):
        with command_errors():
            manifest = manifest_from_options(options)
            scenario = manifest.scenario
            t_now = options["slot"]
            scenario.grid.check(t_now)
            profile = manifest.error_profile or ErrorProfile.zero()
            horizon = effective_horizon(scenario.grid.slot_count, t_now, manifest.laguerre.horizon)

            self.stdout.write(f"🔧 Escenario '{scenario.name}', slot {t_now}, horizonte {horizon}")
            for solver in manifest.solvers:
                for seed in manifest.seeds:
                    directory = run_directory(manifest.output_dir, solver, seed)
                    config = dataclasses.replace(manifest.config, seed=seed)
                    base = RandomStream(seed).child("solve")
                    with record_run("solve", solver, seed, scenario.name,
                                    manifest.parameters(solver, seed), directory) as outcome:
                        forecast = make_forecast(scenario, t_now, horizon, profile, base.child("forecast"))
                        problem = HorizonProblem.build(
                            scenario, forecast, manifest.laguerre,
                            [scenario.battery.initial_energy, 0.0], t_now, tolerance=config.tolerance,
                        )
                        result = SolverService.run(solver, problem, config, base.child(solver))
                        write_pareto(result.values(), result.knee_index, directory, t_now)
                        write_convergence(result.log.to_rows(slot=t_now), directory)
                        if options["dump_constraints"]:
                            dump_feasible_set(problem.fset, directory / "constraints.csv")
                        if result.knee is not None:
                            outcome["total_cost"] = result.knee.objectives.cost
                            outcome["total_dissatisfaction"] = result.knee.objectives.dissatisfaction
                            self.stdout.write(self.style.SUCCESS(
                                f"✅ [{solver}] seed={seed}: {len(result.front)} soluciones, rodilla "
                                f"costo={result.knee.objectives.cost:.4f} "
                                f"insatisfacción={result.knee.objectives.dissatisfaction:.4f} → {directory}"
                            ))
                        else:
                            self.stdout.write(self.style.WARNING(
                                f"⚠️ [{solver}] seed={seed}: sin soluciones factibles → {directory}"
                            ))
