#include <stdio.h>

int main(void)
{
  char user[64];
  int id;
  char record[32];

  if (scanf("%63s %d", user, &id) != 2)
    return 1;
  sprintf(record, "user=%s id=%d", user, id);
  puts(record);
  return 0;
}
