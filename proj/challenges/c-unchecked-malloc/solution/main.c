#include <stdio.h>
#include <stdlib.h>

int main(void)
{
  long n;
  long *values;
  long sum = 0;

  if (scanf("%ld", &n) != 1 || n < 1)
    return 1;
  values = malloc(n * sizeof *values);
  if (values == NULL) {
    printf("error: out of memory\n");
    return 1;
  }
  for (long i = 0; i < n; i++)
    values[i] = i * i;
  for (long i = 0; i < n; i++)
    sum += values[i];
  printf("sum of squares: %ld\n", sum);
  free(values);
  return 0;
}
