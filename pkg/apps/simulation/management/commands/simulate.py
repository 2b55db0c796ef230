from django.core.management.base import BaseCommand

from apps.simulation.manifest import (
    add_manifest_arguments, command_errors, manifest_from_options, workers,
)
from apps.simulation.outputs import run_directory, write_summary, write_trace
from apps.simulation.registry import record_run
from apps.simulation.services import compare_solvers


class Command(BaseCommand):
    help = "Simula un día completo en horizonte deslizante para cada solver y semilla."

    def add_arguments(self, parser):
        add_manifest_arguments(parser, default_error_profile="default")

    def handle(self, *args, **options):
        with command_errors():
            manifest = manifest_from_options(options)
            scenario = manifest.scenario
            profile = manifest.error_profile
            self.stdout.write(
                f"🔧 Simulando '{scenario.name}': solvers={', '.join(manifest.solvers)} "
                f"semillas={manifest.seeds} perfil={profile.name if profile else 'ninguno'}"
            )

            report = compare_solvers(
                scenario, manifest.solvers, manifest.seeds, manifest.config, manifest.laguerre,
                error_profile=profile, workers=workers(),
            )

            for trace in report.traces:
                directory = run_directory(manifest.output_dir, trace.solver, trace.seed, trace.profile)
                extra = {}
                if trace.profile != "perfect" and (trace.solver, trace.seed) in report.degradation:
                    extra["degradation_pct"] = report.degradation[(trace.solver, trace.seed)]
                parameters = {**manifest.parameters(trace.solver, trace.seed), "profile": trace.profile}
                with record_run("simulate", trace.solver, trace.seed, scenario.name, parameters, directory) as outcome:
                    write_trace(trace, scenario, directory, extra)
                    outcome["total_cost"] = trace.total_cost
                    outcome["total_dissatisfaction"] = trace.total_dissatisfaction
                self.stdout.write(
                    f"📦 [{trace.solver}] seed={trace.seed} {trace.profile}: "
                    f"costo={trace.total_cost:.4f} insatisfacción={trace.total_dissatisfaction:.4f}"
                )

            summary = {
                "scenario": scenario.name,
                "solvers": manifest.solvers,
                "seeds": manifest.seeds,
                "runs": [trace.summary() for trace in report.traces],
                "degradation_pct": {
                    f"{solver}/seed_{seed}": value for (solver, seed), value in report.degradation.items()
                },
                "averages": report.averages(),
            }
            path = write_summary(summary, manifest.output_dir)
            self.stdout.write(self.style.SUCCESS(f"✅ Simulación completada. Resumen en {path}"))
